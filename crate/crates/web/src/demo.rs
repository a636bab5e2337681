//! Everything the page can ask for, as plain Rust returning serialisable
//! views. The wasm bindings only forward to this.

use serde::Serialize;
use sparx::cluster::{cluster_counts_from_ratio, partition_mlp, KMeansConfig, Partition};
use sparx::dataset::sample_neighborhood;
use sparx::evaluate::anchor_seed;
use sparx::explain::{prune_for_display, relevance_local, RelevanceEntry};
use sparx::metrics::{
    cognitive_complexity, fit_ridge_surrogate, global_io_unfaithfulness, local_io_for_class, local_io_unfaithfulness,
    structural_unfaithfulness, Substitute,
};
use sparx::qaf::{argument_id, final_strengths, translate_auto};
use sparx::sparsify::{build_clustered, Aggregation, ClusteredMlp, LocalEstimator};
use sparx::{Error, Mlp, Result, Seeds, Table, TrainConfig};

/// Bundled dataset: three Gaussian classes in four features, 50 rows each.
pub const DATA_CSV: &str = include_str!("../../../data/gaussian3.csv");
pub const HIDDEN: [usize; 2] = [12, 12];
const SEED: u64 = 0;
const NEIGHBOURHOOD: usize = 300;
const TOP_K: usize = 5;
/// Share of the weakest edges hidden in drawings.
const DISPLAY_PRUNE: f64 = 40.0;

pub struct Demo {
    mlp: Mlp,
    table: Table,
    accuracy: f64,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub layer_sizes: Vec<usize>,
    pub rows: usize,
    pub features: Vec<String>,
    pub classes: Vec<String>,
    pub training_accuracy: f64,
}

#[derive(Debug, Serialize)]
pub struct GlobalView {
    pub ratio: f64,
    pub cluster_counts: Vec<usize>,
    pub omega: u64,
    pub global_io: f64,
    pub global_structural: f64,
    pub svg: String,
}

#[derive(Debug, Serialize)]
pub struct CurvePoint {
    pub ratio: f64,
    pub global_io: f64,
    pub global_structural: f64,
    pub omega: u64,
}

#[derive(Debug, Serialize)]
pub struct Curve {
    pub points: Vec<CurvePoint>,
    pub io_svg: String,
    pub structural_svg: String,
}

#[derive(Debug, Serialize)]
pub struct LocalView {
    pub row: usize,
    pub ratio: f64,
    pub features: Vec<f64>,
    pub true_class: Option<String>,
    pub predicted_class: String,
    pub probabilities: Vec<f64>,
    /// Kernel-weighted squared error on the predicted class.
    pub local_io: f64,
    pub ridge_local_io: f64,
    /// Strongest contributions to the predicted class's argument.
    pub top_reasons: Vec<RelevanceEntry>,
    pub svg: String,
}

impl Demo {
    /// Train on `csv` (label column `label`), standardising internally and
    /// folding the standardisation back into the first layer.
    pub fn from_csv(csv: &str, hidden: &[usize], seed: u64) -> Result<Self> {
        let table = Table::read_csv(csv.as_bytes(), Some("label"))?;
        let stats = table.feature_stats();
        let standardized = table.standardize()?;
        let mut sizes = vec![table.n_features()];
        sizes.extend_from_slice(hidden);
        sizes.push(table.n_classes().max(2));
        let cfg = TrainConfig {
            epochs: 300,
            seed,
            ..TrainConfig::default()
        };
        let trained = sparx::train(&standardized, &sizes, &cfg)?;
        let offset: Vec<f64> = stats.mean.iter().zip(&stats.std).map(|(m, s)| -m / s).collect();
        let scale: Vec<f64> = stats.std.iter().map(|s| 1.0 / s).collect();
        let mlp = trained.with_input_affine(&offset, &scale);
        let labels = table.labels.clone().unwrap_or_default();
        let correct = table
            .rows
            .iter()
            .zip(&labels)
            .map(|(x, &y)| mlp.predict_class(x).map(|p| p == y))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .filter(|&ok| ok)
            .count();
        let accuracy = correct as f64 / table.len().max(1) as f64;
        Ok(Demo { mlp, table, accuracy })
    }

    pub fn bundled() -> Result<Self> {
        Self::from_csv(DATA_CSV, &HIDDEN, SEED)
    }

    pub fn summary(&self) -> Summary {
        Summary {
            layer_sizes: self.mlp.layer_sizes(),
            rows: self.table.len(),
            features: self.table.feature_names.clone(),
            classes: self.mlp.class_names.clone(),
            training_accuracy: self.accuracy,
        }
    }

    fn partition(&self, ratio: f64) -> Result<Partition> {
        let sizes = self.mlp.layer_sizes();
        let counts = cluster_counts_from_ratio(&sizes[1..sizes.len() - 1], ratio)?;
        let cfg = KMeansConfig {
            seed: Seeds::from_root(SEED).cluster,
            ..KMeansConfig::default()
        };
        partition_mlp(&self.mlp, &self.table.rows, &counts, &cfg)
    }

    fn global(&self, ratio: f64) -> Result<(Partition, ClusteredMlp, f64, f64)> {
        let partition = self.partition(ratio)?;
        let clustered = build_clustered(&self.mlp, &partition, Aggregation::Global)?;
        let io = global_io_unfaithfulness(&self.mlp, &clustered.inner, &self.table.rows)?;
        let (structural, _) = structural_unfaithfulness(&self.mlp, &clustered, &self.table.rows, None)?;
        Ok((partition, clustered, io, structural))
    }

    /// Globally aggregated clustered network drawn at the column means.
    pub fn global_view(&self, ratio: f64) -> Result<GlobalView> {
        let (partition, clustered, global_io, global_structural) = self.global(ratio)?;
        let qaf = translate_auto(&clustered, &self.table.column_means())?;
        let shown = prune_for_display(&qaf, DISPLAY_PRUNE)?;
        Ok(GlobalView {
            ratio,
            cluster_counts: partition.counts(),
            omega: cognitive_complexity(&partition),
            global_io,
            global_structural,
            svg: crate::svg::render_qaf(&shown, None, 640.0, 420.0),
        })
    }

    pub fn faithfulness_curve(&self, ratios: &[f64]) -> Result<Curve> {
        let points = ratios
            .iter()
            .map(|&ratio| {
                let (partition, _, global_io, global_structural) = self.global(ratio)?;
                Ok(CurvePoint {
                    ratio,
                    global_io,
                    global_structural,
                    omega: cognitive_complexity(&partition),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let xs: Vec<f64> = points.iter().map(|p| p.ratio).collect();
        let io: Vec<f64> = points.iter().map(|p| p.global_io).collect();
        let st: Vec<f64> = points.iter().map(|p| p.global_structural).collect();
        Ok(Curve {
            io_svg: crate::svg::line_chart("input-output unfaithfulness", &xs, &io, 320.0, 200.0),
            structural_svg: crate::svg::line_chart("structural unfaithfulness", &xs, &st, 320.0, 200.0),
            points,
        })
    }

    /// Locally aggregated explanation of one data row.
    pub fn local_view(&self, row: usize, ratio: f64) -> Result<LocalView> {
        let x = self
            .table
            .rows
            .get(row)
            .ok_or_else(|| Error::Config(format!("row {row} out of range for {} rows", self.table.len())))?
            .clone();
        let partition = self.partition(ratio)?;
        let nb = sample_neighborhood(&self.table, &x, NEIGHBOURHOOD, None, anchor_seed(SEED, row))?;
        let clustered = build_clustered(
            &self.mlp,
            &partition,
            Aggregation::Local(&nb, LocalEstimator::default()),
        )?;
        let target = self.mlp.predict_class(&x)?.min(self.mlp.n_outputs() - 1);
        let local_io = local_io_for_class(&self.mlp, Substitute::Network(&clustered.inner), &nb, target)?;
        let ridge = fit_ridge_surrogate(&self.mlp, &nb, target, 1.0)?;
        let ridge_local_io = local_io_unfaithfulness(&self.mlp, Substitute::Ridge(&ridge), &nb)?;

        let qaf = translate_auto(&clustered, &x)?;
        let strengths = final_strengths(&qaf)?;
        let relevance = relevance_local(&qaf, &strengths, TOP_K)?;
        let out_id = argument_id(qaf.output_layer(), target);
        let top_reasons = relevance.get(&out_id).map(<[_]>::to_vec).unwrap_or_default();
        let shown = prune_for_display(&qaf, DISPLAY_PRUNE)?;

        let name = |c: usize| self.mlp.class_names.get(c).cloned().unwrap_or_else(|| c.to_string());
        Ok(LocalView {
            row,
            ratio,
            true_class: self.table.labels.as_ref().map(|l| name(l[row])),
            predicted_class: name(target),
            probabilities: self.mlp.outputs(&x)?,
            features: x,
            local_io,
            ridge_local_io,
            top_reasons,
            svg: crate::svg::render_qaf(&shown, Some(&strengths), 640.0, 420.0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    fn demo() -> &'static Demo {
        static DEMO: OnceLock<Demo> = OnceLock::new();
        DEMO.get_or_init(|| Demo::bundled().unwrap())
    }

    #[test]
    fn bundled_model_fits_the_data() {
        let s = demo().summary();
        assert_eq!(s.layer_sizes, vec![4, 12, 12, 3]);
        assert_eq!(s.rows, 150);
        assert!(s.training_accuracy > 0.9, "{}", s.training_accuracy);
    }

    #[test]
    fn ratio_zero_is_exact() {
        let v = demo().global_view(0.0).unwrap();
        assert!(v.global_io < 1e-20 && v.global_structural < 1e-20);
        assert_eq!(v.cluster_counts, vec![12, 12]);
        assert_eq!(v.omega, 144);
    }

    #[test]
    fn curve_shrinks_the_network() {
        let c = demo().faithfulness_curve(&[0.2, 0.5, 0.8]).unwrap();
        assert_eq!(c.points.len(), 3);
        assert!(c.points.windows(2).all(|w| w[1].omega < w[0].omega));
        assert_eq!(c.io_svg.matches("<circle").count(), 3);
    }

    #[test]
    fn local_view_explains_the_prediction() {
        let v = demo().local_view(10, 0.5).unwrap();
        assert_eq!(v.probabilities.len(), 3);
        assert!((v.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(!v.top_reasons.is_empty() && v.top_reasons.len() <= TOP_K);
        assert!(v.local_io.is_finite() && v.ridge_local_io.is_finite());
        assert!(v.svg.contains("strength"));
        assert!(demo().local_view(150, 0.5).is_err());
    }
}
