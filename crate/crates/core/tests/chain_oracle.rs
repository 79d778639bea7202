mod common;

use dynlsm::chain::{compute_messages, dense_chain_oracle, smooth, ChainPotentials};
use dynlsm::CanonicalGaussian;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use common::{dense_marginals, random_pd_chain, rng};

fn chain_strategy() -> impl Strategy<Value = ChainPotentials> {
    (1usize..=3, 1usize..=9, any::<u64>())
        .prop_map(|(d, t_len, seed)| random_pd_chain(&mut rng(seed), d, t_len))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn smoothing_matches_dense_inverse(pots in chain_strategy()) {
        let got = smooth(&pots).unwrap();
        let (means, covs, cross) = dense_marginals(&pots);
        for t in 0..pots.len() {
            prop_assert!((&got.unary[t].mean - &means[t]).abs().max() < 1e-10);
            prop_assert!((&got.unary[t].cov - &covs[t]).abs().max() < 1e-10);
        }
        for t in 0..pots.len().saturating_sub(1) {
            prop_assert!((&got.cross[t] - &cross[t]).abs().max() < 1e-10);
        }
    }

    #[test]
    fn library_oracle_agrees_with_test_oracle(pots in chain_strategy()) {
        let (unary, pairs) = dense_chain_oracle(&pots).unwrap();
        let (means, covs, cross) = dense_marginals(&pots);
        for t in 0..pots.len() {
            prop_assert!((&unary[t].mean - &means[t]).abs().max() < 1e-10);
            prop_assert!((&unary[t].cov - &covs[t]).abs().max() < 1e-10);
        }
        for (t, p) in pairs.iter().enumerate() {
            prop_assert!((p.cross_cov() - &cross[t]).abs().max() < 1e-10);
        }
    }

    #[test]
    fn marginal_covariances_are_pd(pots in chain_strategy()) {
        for m in smooth(&pots).unwrap().unary {
            prop_assert!(m.cov.clone().cholesky().is_some());
        }
    }
}

#[test]
fn reversed_chain_reverses_marginals() {
    let pots = random_pd_chain(&mut rng(5), 2, 6);
    let mut rev = pots.clone();
    rev.unary.reverse();
    let a = smooth(&pots).unwrap();
    let b = smooth(&rev).unwrap();
    for t in 0..6 {
        assert!((&a.unary[t].mean - &b.unary[5 - t].mean).abs().max() < 1e-12);
    }
    for t in 0..5 {
        assert!((&a.cross[t] - b.cross[4 - t].transpose()).abs().max() < 1e-12);
    }
}

#[test]
fn messages_have_boundary_lengths() {
    let pots = random_pd_chain(&mut rng(6), 3, 4);
    let msgs = compute_messages(&pots).unwrap();
    assert_eq!(msgs.forward.len(), 3);
    assert_eq!(msgs.backward.len(), 3);
}

#[test]
fn singular_chain_is_reported() {
    let unary = vec![
        CanonicalGaussian {
            j: DMatrix::from_element(1, 1, 1.0),
            h: DVector::zeros(1),
        };
        3
    ];
    let pots = ChainPotentials {
        unary,
        coupling: 1.0,
    };
    assert!(smooth(&pots).is_err());
}
