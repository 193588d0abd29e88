//! Built-in synthetic designs over the 51 US states (50 plus DC).
//!
//! Three partition settings with 3, 5, and 4 true clusters. The first
//! has one cluster split across the west coast and the northeast; the
//! second gives two of its five clusters disjoint components; the third
//! scatters every cluster over many small disconnected pieces. Each
//! comes in a weak- and a strong-signal variant whose cluster income
//! models differ by the gamma shape spacing and the noise magnitude.

use crate::graph::us_contiguity_edges;
use crate::income::{ClusterIncomeModel, PartitionDesign};

/// Two-letter codes of the 50 states plus DC, sorted.
pub fn us_state_ids() -> Vec<String> {
    const CODES: [&str; 51] = [
        "AK", "AL", "AR", "AZ", "CA", "CO", "CT", "DC", "DE", "FL", "GA", "HI", "IA", "ID", "IL",
        "IN", "KS", "KY", "LA", "MA", "MD", "ME", "MI", "MN", "MO", "MS", "MT", "NC", "ND", "NE",
        "NH", "NJ", "NM", "NV", "NY", "OH", "OK", "OR", "PA", "RI", "SC", "SD", "TN", "TX", "UT",
        "VA", "VT", "WA", "WI", "WV", "WY",
    ];
    CODES.iter().map(|s| s.to_string()).collect()
}

/// Signal strength of a design's cluster separation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Signal {
    Weak,
    Strong,
}

impl Signal {
    pub fn name(&self) -> &'static str {
        match self {
            Signal::Weak => "weak",
            Signal::Strong => "strong",
        }
    }
}

/// A design plus the evaluation settings tied to it.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    pub name: String,
    pub design: PartitionDesign,
    /// Graph-distance limit used when clustering this design.
    pub neighbor_limit: usize,
    pub k_true: usize,
    /// Undirected adjacency over the design's states, as index pairs.
    pub edges: Vec<(usize, usize)>,
}

fn model(shape: f64, noise_shape: f64) -> ClusterIncomeModel {
    ClusterIncomeModel {
        gamma_shape: shape,
        gamma_scale: 50_000.0,
        noise_prob: 0.05,
        noise_shape,
        noise_scale: 50_000.0,
    }
}

fn models_for(number: u8, signal: Signal) -> Vec<ClusterIncomeModel> {
    let (shapes, noise): (&[f64], f64) = match (number, signal) {
        (1, Signal::Weak) => (&[1.15, 1.20, 1.25], 0.3),
        (1, Signal::Strong) => (&[1.10, 1.20, 1.30], 0.5),
        (2, Signal::Weak) => (&[1.10, 1.15, 1.20, 1.25, 1.30], 0.3),
        (2, Signal::Strong) => (&[1.00, 1.10, 1.20, 1.30, 1.40], 0.5),
        (3, Signal::Weak) => (&[1.15, 1.20, 1.25, 1.30], 0.3),
        (3, Signal::Strong) => (&[1.10, 1.20, 1.30, 1.40], 0.5),
        _ => panic!("design number must be 1, 2, or 3"),
    };
    shapes.iter().map(|&s| model(s, noise)).collect()
}

fn cluster_lists(number: u8) -> Vec<Vec<&'static str>> {
    match number {
        // Cluster 1 splits into a west-coast block and a northeast block.
        1 => vec![
            vec![
                "WA", "OR", "CA", "NV", "ID", "AZ", "ME", "NH", "VT", "MA", "RI", "CT", "NY",
                "NJ", "PA",
            ],
            vec![
                "AK", "HI", "MT", "WY", "UT", "CO", "NM", "ND", "SD", "NE", "KS", "OK", "TX",
                "MN", "IA", "MO", "WI", "IL",
            ],
            vec![
                "MI", "IN", "OH", "KY", "TN", "AR", "LA", "MS", "AL", "GA", "FL", "SC", "NC",
                "VA", "WV", "MD", "DE", "DC",
            ],
        ],
        // Clusters 2 and 5 both have disjoint components.
        2 => vec![
            vec!["WA", "OR", "ID", "MT", "WY", "AK", "NV", "UT"],
            vec!["CA", "AZ", "HI", "FL"],
            vec!["ND", "SD", "NE", "KS", "CO", "NM", "OK", "TX", "MN", "IA", "MO", "AR"],
            vec![
                "WI", "IL", "MI", "IN", "OH", "KY", "WV", "PA", "NY", "NJ", "DE", "MD", "DC",
                "VA",
            ],
            vec![
                "LA", "MS", "AL", "TN", "GA", "SC", "NC", "ME", "NH", "VT", "MA", "RI", "CT",
            ],
        ],
        // Every cluster scattered across several small regions.
        3 => vec![
            vec!["WA", "OR", "MN", "IA", "ME", "NH", "VT", "SC", "GA", "OK"],
            vec!["CA", "NV", "ND", "SD", "MI", "OH", "VA", "NC", "HI", "LA"],
            vec!["ID", "MT", "WY", "IL", "IN", "NY", "NJ", "PA", "FL", "AL", "KS"],
            vec![
                "UT", "AZ", "CO", "NM", "TX", "AR", "MO", "WI", "KY", "TN", "WV", "MD", "DE",
                "DC", "MA", "RI", "CT", "NE", "AK", "MS",
            ],
        ],
        _ => panic!("design number must be 1, 2, or 3"),
    }
}

/// Build design 1, 2, or 3 at the given signal strength.
pub fn builtin_design(number: u8, signal: Signal) -> DesignSpec {
    let clusters = cluster_lists(number);
    let state_ids = us_state_ids();
    let mut labels = vec![0usize; state_ids.len()];
    for (c, members) in clusters.iter().enumerate() {
        for code in members {
            let idx = state_ids
                .iter()
                .position(|s| s == code)
                .unwrap_or_else(|| panic!("unknown state {code}"));
            assert_eq!(labels[idx], 0, "state {code} assigned twice");
            labels[idx] = c + 1;
        }
    }
    assert!(labels.iter().all(|&l| l > 0), "some state unassigned");
    let models = models_for(number, signal);
    let neighbor_limit = match number {
        1 => 3,
        _ => 1,
    };
    let edges = us_contiguity_edges(&state_ids);
    DesignSpec {
        name: format!("design{number}-{}", signal.name()),
        design: PartitionDesign {
            state_ids,
            true_labels: labels,
            models,
        },
        neighbor_limit,
        k_true: clusters.len(),
        edges,
    }
}

/// All six design × signal combinations.
pub fn all_builtin_designs() -> Vec<DesignSpec> {
    let mut out = Vec::new();
    for number in 1..=3u8 {
        for signal in [Signal::Weak, Signal::Strong] {
            out.push(builtin_design(number, signal));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn designs_are_complete_and_valid() {
        for spec in all_builtin_designs() {
            spec.design.validate().unwrap();
            assert_eq!(spec.design.n_states(), 51);
            assert_eq!(spec.design.n_clusters(), spec.k_true);
            // every cluster nonempty
            for c in 1..=spec.k_true {
                assert!(
                    spec.design.true_labels.iter().any(|&l| l == c),
                    "{}: cluster {c} empty",
                    spec.name
                );
            }
        }
    }

    #[test]
    fn design_sizes_match_their_construction() {
        let d1 = builtin_design(1, Signal::Strong);
        let sizes: Vec<usize> = (1..=3)
            .map(|c| d1.design.true_labels.iter().filter(|&&l| l == c).count())
            .collect();
        assert_eq!(sizes, vec![15, 18, 18]);
        assert_eq!(d1.neighbor_limit, 3);

        let d2 = builtin_design(2, Signal::Weak);
        assert_eq!(d2.k_true, 5);
        assert_eq!(d2.neighbor_limit, 1);

        let d3 = builtin_design(3, Signal::Strong);
        assert_eq!(d3.k_true, 4);
        // strong-signal shapes are 1.1 .. 1.4
        assert_eq!(d3.design.models[0].gamma_shape, 1.10);
        assert_eq!(d3.design.models[3].gamma_shape, 1.40);
        assert_eq!(d3.design.models[0].noise_shape, 0.5);
    }

    #[test]
    fn shipped_fixture_files_match_the_builtins() {
        for spec in all_builtin_designs() {
            let path = format!(
                "{}/../../fixtures/designs/{}.json",
                env!("CARGO_MANIFEST_DIR"),
                spec.name
            );
            let on_disk = crate::io::read_design_json(std::path::Path::new(&path)).unwrap();
            assert_eq!(on_disk, spec.design, "fixture {} drifted", spec.name);
        }
    }

    #[test]
    fn strong_signal_gini_bands_separate_with_minor_overlap() {
        // per-cluster Gini histograms: ordered means, spread small
        // relative to the spacing
        let spec = builtin_design(1, Signal::Strong);
        let samples = crate::income::simulate_design(&spec.design, 4_000, 12).unwrap();
        let mut per_cluster: Vec<Vec<f64>> = vec![Vec::new(); spec.k_true];
        for (id, &label) in spec.design.state_ids.iter().zip(&spec.design.true_labels) {
            let curve = crate::income::empirical_lorenz(&samples[id], 101).unwrap();
            per_cluster[label - 1].push(crate::income::gini(&curve));
        }
        let stats: Vec<(f64, f64)> = per_cluster
            .iter()
            .map(|g| {
                let mean = g.iter().sum::<f64>() / g.len() as f64;
                let sd = (g.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                    / g.len() as f64)
                    .sqrt();
                (mean, sd)
            })
            .collect();
        // higher gamma shape means lower Gini
        assert!(stats[0].0 > stats[1].0 && stats[1].0 > stats[2].0, "{stats:?}");
        for w in stats.windows(2) {
            let gap = w[0].0 - w[1].0;
            let spread = w[0].1.max(w[1].1);
            assert!(gap > spread, "bands overlap more than minorly: {stats:?}");
        }
    }

    #[test]
    fn weak_and_strong_share_the_partition() {
        for number in 1..=3u8 {
            let weak = builtin_design(number, Signal::Weak);
            let strong = builtin_design(number, Signal::Strong);
            assert_eq!(weak.design.true_labels, strong.design.true_labels);
            assert_ne!(weak.design.models, strong.design.models);
        }
    }
}
