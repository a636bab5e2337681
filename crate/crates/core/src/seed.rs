//! Named sub-seeds derived from one run-level seed.

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable seed for the stream `name` under `seed` (FNV-1a of the name, mixed).
pub fn derive(seed: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    mix(seed ^ mix(h))
}

/// Seed for the `index`-th member of a family (restart, layer, anchor).
pub fn derive_indexed(seed: u64, name: &str, index: u64) -> u64 {
    mix(derive(seed, name) ^ mix(index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Seeds {
    pub root: u64,
    pub train: u64,
    pub split: u64,
    pub cluster: u64,
    pub sample: u64,
}

impl Seeds {
    pub fn from_root(root: u64) -> Self {
        Seeds {
            root,
            train: derive(root, "train"),
            split: derive(root, "split"),
            cluster: derive(root, "cluster"),
            sample: derive(root, "sample"),
        }
    }
}
