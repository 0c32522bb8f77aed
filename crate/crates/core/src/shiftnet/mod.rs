//! A small per-atom shift predictor: hand-built atom features, two GELU
//! hidden layers with a linear head, analytic gradients, and four ways of
//! conditioning on the solvent.
//!
//! Feature row layout (`D = 45`):
//!
//! | columns | content |
//! |---|---|
//! | 0..13 | element one-hot over [`ELEMENT_SLOTS`] plus "other" |
//! | 13 | heavy-atom degree |
//! | 14 | attached hydrogens (implicit and explicit) |
//! | 15 | aromatic flag |
//! | 16 | formal charge |
//! | 17..30 | element histogram of neighbours (hydrogen slot = attached H) |
//! | 30..43 | element histogram at distance two along non-backtracking walks |
//! | 43 | size of the atom's equivalence class |
//! | 44 | set on ¹H rows, which describe the attached heavy atom |

mod features;
mod model;

pub use features::{
    atom_features, featurize, featurize_sites, slot, FeatureError, Featurized, AROMATIC, CHARGE, CLASS_SIZE, D,
    DEGREE, ELEMENT, ELEMENT_SLOTS, HYDROGENS, H_ROW, RADIUS1, RADIUS2, SLOTS,
};
pub use model::{
    gelu, gelu_grad, Checkpoint, CheckpointError, Layout, ModelConfig, ModelError, MolInput,
    Normalization, Strategy, Tape, ToyModel, CHECKPOINT_SCHEMA, CHECKPOINT_VERSION, SOLVENTS,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chemgraph::parse_smiles;
    use crate::specparse::{Nucleus, SolventClass};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};

    const SOLVENT_CLASSES: [SolventClass; 3] =
        [SolventClass::CDCl3, SolventClass::DmsoD6, SolventClass::Other];

    fn model(strategy: Strategy, seed: u64) -> ToyModel {
        let cfg = ModelConfig {
            hidden: 16,
            strategy,
            ..ModelConfig::default()
        };
        let mut m = ToyModel::new(cfg, Nucleus::C13, Normalization { mean: 100.0, scale: 40.0 }, seed);
        // move every parameter off its initial value
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed + 1);
        for p in &mut m.params {
            *p += rng.random_range(-0.2..0.2);
        }
        m
    }

    fn feats(s: &str) -> Featurized {
        featurize(&parse_smiles(s).unwrap(), Nucleus::C13).unwrap()
    }

    #[test]
    fn none_ignores_solvent() {
        let m = model(Strategy::None, 1);
        let f = feats("CC(=O)Oc1ccccc1");
        let base = m.predict(f.rows.view(), SolventClass::CDCl3).unwrap();
        for c in SOLVENT_CLASSES {
            assert_eq!(m.predict(f.rows.view(), c).unwrap(), base);
        }
    }

    #[test]
    fn conditioned_strategies_see_solvent() {
        let f = feats("CC(=O)Oc1ccccc1");
        for s in Strategy::ALL.into_iter().filter(|&s| s != Strategy::None) {
            let m = model(s, 2);
            let a = m.predict(f.rows.view(), SolventClass::CDCl3).unwrap();
            let b = m.predict(f.rows.view(), SolventClass::DmsoD6).unwrap();
            assert_ne!(a, b, "{s:?}");
        }
    }

    #[test]
    fn scalar_correction_is_additive() {
        let mut m = model(Strategy::ScalarCorrection, 3);
        let f = feats("CCO");
        let plain = m.without_conditioning().predict(f.rows.view(), SolventClass::CDCl3).unwrap();
        *m.solvent_bias_mut(SolventClass::CDCl3).unwrap() = 0.2;
        let shifted = m.predict(f.rows.view(), SolventClass::CDCl3).unwrap();
        for (a, b) in shifted.iter().zip(&plain) {
            assert!((a - b - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn equivalent_atoms_get_equal_predictions() {
        let f = feats("Cc1ccc(C)cc1");
        let mol = parse_smiles("Cc1ccc(C)cc1").unwrap();
        let classes = mol.equiv_class();
        for s in Strategy::ALL {
            let m = model(s, 4);
            let p = m.predict(f.rows.view(), SolventClass::DmsoD6).unwrap();
            for i in 0..p.len() {
                for j in 0..p.len() {
                    if classes[f.sites[i]] == classes[f.sites[j]] {
                        assert_eq!(p[i].to_bits(), p[j].to_bits());
                    }
                }
            }
        }
    }

    #[test]
    fn averaged_solvent_parameters_ignore_the_tag() {
        let f = feats("CC(=O)Oc1ccccc1");
        for s in Strategy::ALL {
            let m = model(s, 12).solvent_averaged();
            let base = m.predict(f.rows.view(), SolventClass::CDCl3).unwrap();
            for c in SOLVENT_CLASSES {
                let p = m.predict(f.rows.view(), c).unwrap();
                for (a, b) in p.iter().zip(&base) {
                    assert!((a - b).abs() < 1e-12, "{s:?}");
                }
            }
        }
    }

    #[test]
    fn zero_upstream_gives_zero_gradient() {
        let f = feats("CCO");
        for s in Strategy::ALL {
            let m = model(s, 5);
            let input = [MolInput {
                rows: f.rows.view(),
                solvent: SolventClass::Other,
            }];
            let (_, tape) = m.forward(&input).unwrap();
            let g = m.backward(&tape, &[vec![0.0; f.len()]]).unwrap();
            assert!(g.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn scalar_bias_gradient_is_upstream_sum() {
        let m = model(Strategy::ScalarCorrection, 6);
        let f = feats("CCCO");
        let input = [MolInput {
            rows: f.rows.view(),
            solvent: SolventClass::DmsoD6,
        }];
        let (_, tape) = m.forward(&input).unwrap();
        let up = vec![0.5, -1.25, 2.0];
        let g = m.backward(&tape, &[up]).unwrap();
        let sb = m.layout().solvent_bias.clone();
        assert_eq!(&g[sb], &[0.0, 1.25, 0.0]);
    }

    #[test]
    fn dimension_mismatch() {
        let m = model(Strategy::None, 7);
        let rows = Array2::zeros((2, 5));
        assert_eq!(
            m.predict(rows.view(), SolventClass::CDCl3),
            Err(ModelError::DimensionMismatch { got: 5, want: D })
        );
    }

    /// Central differences of `sum(c * ppm)` on a D=4, H=3 model.
    #[test]
    fn tiny_model_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for s in Strategy::ALL {
            for skip in [false, true] {
                let cfg = ModelConfig {
                    input_dim: 4,
                    hidden: 3,
                    strategy: s,
                    skip,
                };
                let mut m = ToyModel::new(cfg, Nucleus::H1, Normalization { mean: 2.0, scale: 1.5 }, 9);
                for p in &mut m.params {
                    *p = rng.random_range(-1.0..1.0);
                }
                let xs: Vec<Array2<f64>> = [3, 2]
                    .iter()
                    .map(|&n| Array2::from_shape_fn((n, 4), |_| rng.random_range(-2.0..2.0)))
                    .collect();
                let solvents = [SolventClass::DmsoD6, SolventClass::Other];
                let inputs: Vec<MolInput> = xs
                    .iter()
                    .zip(solvents)
                    .map(|(x, solvent)| MolInput {
                        rows: x.view(),
                        solvent,
                    })
                    .collect();
                let up: Vec<Vec<f64>> = xs
                    .iter()
                    .map(|x| (0..x.nrows()).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect();
                let objective = |m: &ToyModel| -> f64 {
                    let (out, _) = m.forward(&inputs).unwrap();
                    out.iter()
                        .zip(&up)
                        .flat_map(|(o, u)| o.iter().zip(u).map(|(a, b)| a * b))
                        .sum()
                };
                let (_, tape) = m.forward(&inputs).unwrap();
                let g = m.backward(&tape, &up).unwrap();
                let h = 1e-6;
                for i in 0..m.params.len() {
                    let mut plus = m.clone();
                    plus.params[i] += h;
                    let mut minus = m.clone();
                    minus.params[i] -= h;
                    let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
                    assert!((fd - g[i]).abs() < 1e-5, "{s:?} skip={skip} param {i}: {fd} vs {}", g[i]);
                }
            }
        }
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        for s in Strategy::ALL {
            let m = model(s, 10);
            let back = ToyModel::from_json(&m.to_json()).unwrap();
            assert_eq!(back.params.len(), m.params.len());
            for (a, b) in back.params.iter().zip(&m.params) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
            assert_eq!(back, m);
        }
        let mut c = model(Strategy::None, 1).to_checkpoint();
        c.params.pop();
        assert!(matches!(
            ToyModel::from_checkpoint(c),
            Err(CheckpointError::ParamCount { .. })
        ));
    }

    #[test]
    fn gelu_values() {
        assert_eq!(gelu(0.0), 0.0);
        assert!((gelu(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((gelu_grad(0.0) - 0.5).abs() < 1e-15);
        let h = 1e-6;
        for x in [-3.0, -0.7, 0.4, 2.5] {
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn strategy_names() {
        for s in Strategy::ALL {
            assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
        }
        assert_eq!("pre-backbone".parse::<Strategy>().unwrap(), Strategy::PreBackbone);
        assert!("cls".parse::<Strategy>().is_err());
    }
}
