//! Finite-difference checks of the two training objectives on small
//! networks: the style classification loss with attention regularizers and
//! the dual-term imitation loss.

use imfilm::features::SnippetEmbedding;
use imfilm::imitation::{ImitationDims, ImitationNet, PairSample};
use imfilm::style_net::{StyleDims, StyleNet, StyleTrainConfig, Variant};
use imfilm::StyleLabel;
use imfilm_nn::{grad_check, seeded_rng, NnError, ParamSet};
use rand::Rng;

const TOL: f64 = 1e-4;
const EPS: f64 = 1e-5;

fn nn_err(e: imfilm::Error) -> NnError {
    NnError::Numeric(e.to_string())
}

fn uniform<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn unit<R: Rng>(rng: &mut R) -> [f64; 3] {
    let v = uniform(rng, 3);
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-3);
    [v[0] / n, v[1] / n, v[2] / n]
}

fn action<R: Rng>(rng: &mut R) -> [f64; 7] {
    let d = unit(rng);
    let w = uniform(rng, 3);
    [
        w[0] * 0.3,
        w[1] * 0.3,
        w[2] * 0.3,
        d[0],
        d[1],
        d[2],
        rng.random_range(0.05..0.9),
    ]
}

fn style_check(variant: Variant, seed: u64, lambda: f64) -> f64 {
    let dims = StyleDims {
        fg_in: 3,
        bg_in: 4,
        hidden: 4,
        att_hidden: 3,
    };
    let net = StyleNet::new(variant, dims, seed).unwrap();
    let mut rng = seeded_rng(seed ^ 0xA5);
    let t = rng.random_range(1..=5);
    let seq: Vec<SnippetEmbedding> = (0..t)
        .map(|_| SnippetEmbedding {
            fg: uniform(&mut rng, 3),
            bg: uniform(&mut rng, 4),
        })
        .collect();
    let y = StyleLabel::ALL[rng.random_range(0..5)];
    let cfg = StyleTrainConfig {
        lambda_fg: lambda,
        lambda_bg: lambda,
        ..StyleTrainConfig::default()
    };
    let f = |p: &ParamSet| {
        let mut g = p.zeros_like();
        let (l, _) = net.loss_with(p, &seq, y, &cfg, Some(&mut g)).map_err(nn_err)?;
        Ok((l, g))
    };
    grad_check(f, &net.params, EPS).unwrap()
}

fn imitation_check(seed: u64, dual: bool) -> f64 {
    let dims = ImitationDims {
        style_dim: 4,
        obs_dim: 5,
        hidden1: 6,
        context: 4,
        hidden2: 5,
    };
    let net = ImitationNet::new(dims, seed).unwrap();
    let mut rng = seeded_rng(seed ^ 0x5A);
    let s = PairSample {
        v: uniform(&mut rng, 4),
        obs: uniform(&mut rng, 5),
        action: action(&mut rng),
        label: action(&mut rng),
        style: dual.then(|| (action(&mut rng), action(&mut rng))),
    };
    let f = |p: &ParamSet| {
        let mut g = p.zeros_like();
        let l = net.loss_with(p, &s, 0.7, Some(&mut g)).map_err(nn_err)?;
        Ok((l, g))
    };
    grad_check(f, &net.params, EPS).unwrap()
}

#[test]
fn style_loss_gradients_all_variants() {
    for seed in 0..20 {
        for v in Variant::ALL {
            let err = style_check(v, seed, 0.01);
            assert!(err <= TOL, "{v} seed {seed}: {err:e}");
        }
    }
}

#[test]
fn attention_regularizer_gradient_with_large_weight() {
    for seed in 0..5 {
        let err = style_check(Variant::FgBgAtt, 100 + seed, 0.5);
        assert!(err <= TOL, "seed {seed}: {err:e}");
    }
}

#[test]
fn dual_imitation_loss_gradients() {
    for seed in 0..20 {
        let err = imitation_check(seed, true);
        assert!(err <= TOL, "seed {seed}: {err:e}");
    }
}

#[test]
fn single_term_imitation_loss_gradients() {
    for seed in 0..5 {
        let err = imitation_check(seed, false);
        assert!(err <= TOL, "seed {seed}: {err:e}");
    }
}
