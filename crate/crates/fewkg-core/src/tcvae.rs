//! Triplet conditional VAE.
//!
//! The recognition network folds an encoded triplet pairwise, relation in
//! the middle ((o_h, o_r) and (o_r, o_t), then the pair of results), into a
//! diagonal Gaussian over the latent space. A feed-forward prior conditions
//! on the relation embedding alone, which is what makes generation possible
//! at meta-test time when only the relation is known. The generator expands
//! a latent draw concatenated with o_r back to a (3, u) triplet embedding
//! through two transposed convolutions.
//!
//! Node-building functions extend a [`Graph`]; [`augment`] is the
//! evaluation-mode surface that samples K triplets as plain tensors.

use alloc::vec::Vec;

use crate::diff::{ops, NodeId, ParameterSet, Tensor};
use crate::diff::xavier_init;
use crate::encoder::{Graph, TripletNodes};
use crate::rng::{self, ChaCha8Rng};
use crate::config::ModelConfig;

/// Prior-regularizer constants: a wide Gaussian pull on the means and a
/// weak log-barrier keeping the standard deviations near 1.
pub const SIGMA_MU: f64 = 10000.0;
pub const SIGMA_SIGMA: f64 = 1e-4;

/// Tape nodes of a diagonal Gaussian. `log_sigma` is the clamped
/// pre-exponentiation head output, kept so the KL term can subtract logs
/// without re-taking them.
#[derive(Debug, Clone, Copy)]
pub struct GaussianNodes {
    pub mu: NodeId,
    pub log_sigma: NodeId,
    pub sigma: NodeId,
}

/// A Gaussian detached from the tape.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams {
    pub mu: Tensor,
    pub sigma: Tensor,
}

/// One generated triplet embedding, rows of the generator's (3, u) output.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedTriplet {
    pub head: Tensor,
    pub relation: Tensor,
    pub tail: Tensor,
}

/// Registers recognition, prior, and generator weights.
pub fn register_tcvae_params(params: &mut ParameterSet, config: &ModelConfig, rng: &mut ChaCha8Rng) {
    let u = config.embed_dim;
    let dz = config.latent_dim;
    let mut add = |name: &str, dims: &[usize], rng: &mut ChaCha8Rng| {
        params.insert(name, xavier_init(dims, rng));
    };
    for block in ["pair_hr", "pair_rt", "top"] {
        add(&alloc::format!("vae.rec.{block}.w"), &[u, 2, u], rng);
        add(&alloc::format!("vae.rec.{block}.b"), &[u], rng);
    }
    for head in ["mu", "logsigma"] {
        add(&alloc::format!("vae.rec.{head}.w"), &[dz, u], rng);
        add(&alloc::format!("vae.rec.{head}.b"), &[dz], rng);
    }
    add("vae.prior.ff.w", &[u, u], rng);
    add("vae.prior.ff.b", &[u], rng);
    for head in ["mu", "logsigma"] {
        add(&alloc::format!("vae.prior.{head}.w"), &[dz, u], rng);
        add(&alloc::format!("vae.prior.{head}.b"), &[dz], rng);
    }
    add("vae.gen.ff.w", &[u, dz + u], rng);
    add("vae.gen.ff.b", &[u], rng);
    add("vae.gen.deconv1.w", &[u, 2, u], rng);
    add("vae.gen.deconv1.b", &[u], rng);
    add("vae.gen.deconv2.w", &[u, 2, u], rng);
    add("vae.gen.deconv2.b", &[u], rng);
}

/// Stacks two u-vectors into (2, u) and folds them to one u-vector with a
/// width-2 valid convolution and tanh.
fn pair_block(g: &mut Graph, a: NodeId, b: NodeId, block: &str) -> NodeId {
    let w = g.p(&alloc::format!("vae.rec.{block}.w"));
    let bias = g.p(&alloc::format!("vae.rec.{block}.b"));
    let stacked = ops::stack2(&mut g.tape, a, b);
    let folded = ops::conv1d_valid(&mut g.tape, stacked, w, bias);
    let active = ops::tanh(&mut g.tape, folded);
    ops::row(&mut g.tape, active, 0)
}

fn gaussian_heads(g: &mut Graph, hidden: NodeId, prefix: &str) -> GaussianNodes {
    let mu_w = g.p(&alloc::format!("{prefix}.mu.w"));
    let mu_b = g.p(&alloc::format!("{prefix}.mu.b"));
    let ls_w = g.p(&alloc::format!("{prefix}.logsigma.w"));
    let ls_b = g.p(&alloc::format!("{prefix}.logsigma.b"));
    let mu = ops::affine_vec(&mut g.tape, mu_w, hidden, mu_b);
    let raw = ops::affine_vec(&mut g.tape, ls_w, hidden, ls_b);
    let c = g.config.log_sigma_clamp;
    let log_sigma = ops::clamp(&mut g.tape, raw, -c, c);
    let sigma = ops::exp(&mut g.tape, log_sigma);
    GaussianNodes { mu, log_sigma, sigma }
}

/// Recognition network q(z | O): the two-layer pairwise tree followed by
/// Gaussian heads.
pub fn recognize(g: &mut Graph, o: &TripletNodes) -> GaussianNodes {
    let left = pair_block(g, o.head, o.relation, "pair_hr");
    let right = pair_block(g, o.relation, o.tail, "pair_rt");
    let top = pair_block(g, left, right, "top");
    gaussian_heads(g, top, "vae.rec")
}

/// Prior network p(z | o_r): one affine+tanh block and Gaussian heads.
pub fn prior(g: &mut Graph, o_r: NodeId) -> GaussianNodes {
    let w = g.p("vae.prior.ff.w");
    let b = g.p("vae.prior.ff.b");
    let lin = ops::affine_vec(&mut g.tape, w, o_r, b);
    let hidden = ops::tanh(&mut g.tape, lin);
    gaussian_heads(g, hidden, "vae.prior")
}

/// z = mu + sigma * eps with the noise frozen as a constant, so gradients
/// flow into mu and sigma but never into eps.
pub fn reparameterize(g: &mut Graph, gauss: &GaussianNodes, eps: &Tensor) -> NodeId {
    let eps = g.tape.leaf(eps.clone());
    let scaled = ops::mul(&mut g.tape, gauss.sigma, eps);
    ops::add(&mut g.tape, gauss.mu, scaled)
}

/// Generator p(G | z, o_r): (z, o_r) -> u-dim hidden -> (2, u) -> (3, u).
/// The last deconvolution is linear so outputs can match arbitrary
/// embedding values.
pub fn generate(g: &mut Graph, z: NodeId, o_r: NodeId) -> NodeId {
    let ff_w = g.p("vae.gen.ff.w");
    let ff_b = g.p("vae.gen.ff.b");
    let d1_w = g.p("vae.gen.deconv1.w");
    let d1_b = g.p("vae.gen.deconv1.b");
    let d2_w = g.p("vae.gen.deconv2.w");
    let d2_b = g.p("vae.gen.deconv2.b");
    let joint = ops::concat_vec(&mut g.tape, z, o_r);
    let lin = ops::affine_vec(&mut g.tape, ff_w, joint, ff_b);
    let hidden = ops::tanh(&mut g.tape, lin);
    let u = g.config.embed_dim;
    let seq = reshape_vec_to_row(g, hidden, u);
    let grown = ops::deconv1d(&mut g.tape, seq, d1_w, d1_b);
    let grown = ops::tanh(&mut g.tape, grown);
    ops::deconv1d(&mut g.tape, grown, d2_w, d2_b)
}

/// (u) -> (1, u) without copying semantics: forward is the identity on the
/// flat buffer and backward hands the gradient straight through.
fn reshape_vec_to_row(g: &mut Graph, x: NodeId, u: usize) -> NodeId {
    let v = g.value(x).clone();
    assert_eq!(v.len(), u);
    let out = Tensor::from_vec(&[1, u], v.data().to_vec());
    g.tape.push(out, alloc::vec![x], move || {
        alloc::boxed::Box::new(move |grad, _| {
            alloc::vec![Tensor::vector(grad.data().to_vec())]
        })
    })
}

/// Closed-form KL(q || p) for diagonal Gaussians.
pub fn kl_divergence(g: &mut Graph, q: &GaussianNodes, p: &GaussianNodes) -> NodeId {
    let log_ratio = ops::sub(&mut g.tape, p.log_sigma, q.log_sigma);
    let var_q = ops::mul(&mut g.tape, q.sigma, q.sigma);
    let dmu = ops::sub(&mut g.tape, q.mu, p.mu);
    let dmu2 = ops::mul(&mut g.tape, dmu, dmu);
    let num = ops::add(&mut g.tape, var_q, dmu2);
    let var_p = ops::mul(&mut g.tape, p.sigma, p.sigma);
    let two_var_p = ops::scale(&mut g.tape, var_p, 2.0);
    let frac = ops::div(&mut g.tape, num, two_var_p);
    let inner = ops::add(&mut g.tape, log_ratio, frac);
    let shifted = ops::add_const(&mut g.tape, inner, -0.5);
    ops::sum(&mut g.tape, shifted)
}

/// L_rec = -1/2 sum over all 3u entries of (O - G)^2; zero only at perfect
/// reconstruction.
pub fn reconstruction_loss(g: &mut Graph, o: &TripletNodes, generated: NodeId) -> NodeId {
    let mut total: Option<NodeId> = None;
    for (i, &part) in [o.head, o.relation, o.tail].iter().enumerate() {
        let g_row = ops::row(&mut g.tape, generated, i);
        let diff = ops::sub(&mut g.tape, part, g_row);
        let sq = ops::mul(&mut g.tape, diff, diff);
        let s = ops::sum(&mut g.tape, sq);
        total = Some(match total {
            Some(t) => ops::add(&mut g.tape, t, s),
            None => s,
        });
    }
    ops::scale(&mut g.tape, total.expect("three rows"), -0.5)
}

/// L_reg = sum_i [ -mu_i^2 / (2 sigma_mu^2) + sigma_sigma (log sigma_i - sigma_i) ].
pub fn prior_regularizer(g: &mut Graph, p: &GaussianNodes) -> NodeId {
    let mu2 = ops::mul(&mut g.tape, p.mu, p.mu);
    let mu_term = ops::scale(&mut g.tape, mu2, -1.0 / (2.0 * SIGMA_MU * SIGMA_MU));
    let barrier = ops::sub(&mut g.tape, p.log_sigma, p.sigma);
    let sig_term = ops::scale(&mut g.tape, barrier, SIGMA_SIGMA);
    let both = ops::add(&mut g.tape, mu_term, sig_term);
    ops::sum(&mut g.tape, both)
}

/// Samples K triplets from the prior conditioned on `o_r`, as constants.
/// K = 0 is the generator-off ablation and returns an empty list.
pub fn augment(
    params: &ParameterSet,
    config: &ModelConfig,
    o_r: &Tensor,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<GeneratedTriplet> {
    let mut g = Graph::new(params, config, false);
    let o_r_node = g.tape.leaf(o_r.clone());
    let p = prior(&mut g, o_r_node);
    let u = config.embed_dim;
    (0..k)
        .map(|_| {
            let eps = Tensor::vector(rng::normal_vec(rng, config.latent_dim));
            let z = reparameterize(&mut g, &p, &eps);
            let out = generate(&mut g, z, o_r_node);
            let m = g.value(out);
            let row = |i: usize| Tensor::vector(m.data()[i * u..(i + 1) * u].to_vec());
            GeneratedTriplet { head: row(0), relation: row(1), tail: row(2) }
        })
        .collect()
}

/// Evaluation-mode wrapper around [`prior`].
pub fn prior_values(params: &ParameterSet, config: &ModelConfig, o_r: &Tensor) -> GaussianParams {
    let mut g = Graph::new(params, config, false);
    let o_r_node = g.tape.leaf(o_r.clone());
    let p = prior(&mut g, o_r_node);
    GaussianParams { mu: g.value(p.mu).clone(), sigma: g.value(p.sigma).clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::finite_difference_check;
    use alloc::vec;
    use rand::Rng;

    fn toy_config() -> ModelConfig {
        ModelConfig {
            embed_dim: 4,
            n_layers: 2,
            n_memories: 3,
            latent_dim: 3,
            ..ModelConfig::default()
        }
    }

    fn toy_params(config: &ModelConfig, seed: u64) -> ParameterSet {
        let mut p = ParameterSet::new();
        register_tcvae_params(&mut p, config, &mut rng::stream(seed));
        p
    }

    fn leaf_triplet(g: &mut Graph, seed: u64) -> TripletNodes {
        let mut r = rng::stream(seed);
        let mut v = |_: usize| {
            Tensor::vector((0..4).map(|_| r.random::<f64>() * 2.0 - 1.0).collect())
        };
        TripletNodes {
            head: g.tape.leaf(v(0)),
            relation: g.tape.leaf(v(1)),
            tail: g.tape.leaf(v(2)),
        }
    }

    #[test]
    fn recognition_emits_positive_sigma_of_latent_dim() {
        let config = toy_config();
        let params = toy_params(&config, 1);
        let mut g = Graph::new(&params, &config, false);
        let o = leaf_triplet(&mut g, 10);
        let q = recognize(&mut g, &o);
        assert_eq!(g.value(q.mu).dims(), &[3]);
        assert_eq!(g.value(q.sigma).dims(), &[3]);
        assert!(g.value(q.sigma).data().iter().all(|s| *s > 0.0));
    }

    #[test]
    fn recognition_is_deterministic() {
        let config = toy_config();
        let params = toy_params(&config, 2);
        let run = || {
            let mut g = Graph::new(&params, &config, false);
            let o = leaf_triplet(&mut g, 11);
            let q = recognize(&mut g, &o);
            (g.value(q.mu).clone(), g.value(q.sigma).clone())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn prior_distinguishes_relations() {
        let config = toy_config();
        let params = toy_params(&config, 3);
        let a = prior_values(&params, &config, &Tensor::vector(vec![0.5, -0.2, 0.8, 0.1]));
        let b = prior_values(&params, &config, &Tensor::vector(vec![-0.9, 0.4, 0.0, 0.3]));
        assert_eq!(a.mu.dims(), &[3]);
        assert!(a.sigma.data().iter().all(|s| *s > 0.0));
        let gap: f64 = (0..3).map(|i| (a.mu.data()[i] - b.mu.data()[i]).abs()).sum();
        assert!(gap > 1e-9);
    }

    #[test]
    fn reparameterize_formula() {
        let config = toy_config();
        let params = toy_params(&config, 4);
        let mut g = Graph::new(&params, &config, false);
        let gauss = GaussianNodes {
            mu: g.tape.leaf(Tensor::vector(vec![0.3])),
            log_sigma: g.tape.leaf(Tensor::vector(vec![libm::log(2.0)])),
            sigma: g.tape.leaf(Tensor::vector(vec![2.0])),
        };
        let z0 = reparameterize(&mut g, &gauss, &Tensor::vector(vec![0.0]));
        assert_eq!(g.value(z0).data(), &[0.3]);
        let z1 = reparameterize(&mut g, &gauss, &Tensor::vector(vec![1.0]));
        assert_eq!(g.value(z1).data(), &[2.3]);
    }

    #[test]
    fn reparameterized_sample_mean_approaches_mu() {
        let config = toy_config();
        let params = toy_params(&config, 5);
        let mut g = Graph::new(&params, &config, false);
        let gauss = GaussianNodes {
            mu: g.tape.leaf(Tensor::vector(vec![1.5])),
            log_sigma: g.tape.leaf(Tensor::vector(vec![0.0])),
            sigma: g.tape.leaf(Tensor::vector(vec![0.7])),
        };
        let n = 100_000;
        let mut r = rng::stream(6);
        let mut mean = 0.0;
        for _ in 0..n {
            let eps = Tensor::vector(rng::normal_vec(&mut r, 1));
            let z = reparameterize(&mut g, &gauss, &eps);
            mean += g.value(z).data()[0];
        }
        mean /= n as f64;
        let band = 3.0 * 0.7 / libm::sqrt(n as f64);
        assert!((mean - 1.5).abs() < band, "mean {mean} outside {band}");
    }

    #[test]
    fn generator_outputs_three_rows() {
        let config = toy_config();
        let params = toy_params(&config, 7);
        let mut g = Graph::new(&params, &config, false);
        let z = g.tape.leaf(Tensor::vector(vec![0.1, -0.2, 0.3]));
        let o_r = g.tape.leaf(Tensor::vector(vec![0.4, 0.5, -0.6, 0.7]));
        let out = generate(&mut g, z, o_r);
        assert_eq!(g.value(out).dims(), &[3, 4]);
        assert!(g.value(out).all_finite());
    }

    #[test]
    fn kl_of_identical_gaussians_is_zero() {
        let config = toy_config();
        let params = toy_params(&config, 8);
        let mut g = Graph::new(&params, &config, false);
        let n = GaussianNodes {
            mu: g.tape.leaf(Tensor::vector(vec![0.3, -0.8])),
            log_sigma: g.tape.leaf(Tensor::vector(vec![0.1, -0.4])),
            sigma: g.tape.leaf(Tensor::vector(vec![libm::exp(0.1), libm::exp(-0.4)])),
        };
        let kl = kl_divergence(&mut g, &n, &n);
        assert!(g.value(kl).item().abs() < 1e-12);
    }

    #[test]
    fn kl_unit_shift_is_half() {
        let config = toy_config();
        let params = toy_params(&config, 9);
        let mut g = Graph::new(&params, &config, false);
        let gauss = |mu: f64, g: &mut Graph| GaussianNodes {
            mu: g.tape.leaf(Tensor::vector(vec![mu])),
            log_sigma: g.tape.leaf(Tensor::vector(vec![0.0])),
            sigma: g.tape.leaf(Tensor::vector(vec![1.0])),
        };
        let q = gauss(1.0, &mut g);
        let p = gauss(0.0, &mut g);
        let kl = kl_divergence(&mut g, &q, &p);
        assert!((g.value(kl).item() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kl_matches_monte_carlo_log_density_ratio() {
        // Independent oracle: KL(q||p) = E_q[log q(z) - log p(z)] estimated
        // by sampling, with a 3-standard-error acceptance band.
        let dz = 50;
        let mut r = rng::stream(10);
        let draw = |r: &mut ChaCha8Rng, lo: f64, hi: f64, n: usize| -> Vec<f64> {
            (0..n).map(|_| lo + (hi - lo) * r.random::<f64>()).collect()
        };
        let mu_q = draw(&mut r, -1.0, 1.0, dz);
        let sd_q = draw(&mut r, 0.5, 1.5, dz);
        let mu_p = draw(&mut r, -1.0, 1.0, dz);
        let sd_p = draw(&mut r, 0.5, 1.5, dz);

        let config = toy_config();
        let params = toy_params(&config, 11);
        let mut g = Graph::new(&params, &config, false);
        let q = GaussianNodes {
            mu: g.tape.leaf(Tensor::vector(mu_q.clone())),
            log_sigma: g.tape.leaf(Tensor::vector(sd_q.iter().map(|s| libm::log(*s)).collect())),
            sigma: g.tape.leaf(Tensor::vector(sd_q.clone())),
        };
        let p = GaussianNodes {
            mu: g.tape.leaf(Tensor::vector(mu_p.clone())),
            log_sigma: g.tape.leaf(Tensor::vector(sd_p.iter().map(|s| libm::log(*s)).collect())),
            sigma: g.tape.leaf(Tensor::vector(sd_p.clone())),
        };
        let kl_node = kl_divergence(&mut g, &q, &p);
        let closed = g.value(kl_node).item();

        let log_density = |z: &[f64], mu: &[f64], sd: &[f64]| -> f64 {
            z.iter()
                .zip(mu)
                .zip(sd)
                .map(|((z, m), s)| {
                    let d = (z - m) / s;
                    -libm::log(*s) - 0.5 * d * d
                })
                .sum()
        };
        let n = 100_000;
        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..n {
            let z: Vec<f64> = (0..dz)
                .map(|i| mu_q[i] + sd_q[i] * rng::normal(&mut r))
                .collect();
            let ratio = log_density(&z, &mu_q, &sd_q) - log_density(&z, &mu_p, &sd_p);
            sum += ratio;
            sum_sq += ratio * ratio;
        }
        let mc = sum / n as f64;
        let var = (sum_sq / n as f64 - mc * mc).max(0.0);
        let se = libm::sqrt(var / n as f64);
        assert!(
            (closed - mc).abs() < 3.0 * se,
            "closed {closed} vs mc {mc} (3se {})",
            3.0 * se
        );
        assert!(closed > 0.0);
    }

    #[test]
    fn reconstruction_loss_oracle_values() {
        let config = ModelConfig { embed_dim: 2, ..toy_config() };
        let params = toy_params(&config, 12);
        let mut g = Graph::new(&params, &config, false);
        let o = TripletNodes {
            head: g.tape.leaf(Tensor::vector(vec![1.0, 2.0])),
            relation: g.tape.leaf(Tensor::vector(vec![3.0, 4.0])),
            tail: g.tape.leaf(Tensor::vector(vec![5.0, 6.0])),
        };
        let same = g
            .tape
            .leaf(Tensor::from_vec(&[3, 2], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let zero = reconstruction_loss(&mut g, &o, same);
        assert_eq!(g.value(zero).item(), 0.0);
        // Every entry off by one: -1/2 * 6 = -3.
        let off = g
            .tape
            .leaf(Tensor::from_vec(&[3, 2], vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]));
        let l = reconstruction_loss(&mut g, &o, off);
        assert_eq!(g.value(l).item(), -3.0);
        assert!(g.value(l).item() <= 0.0);
    }

    #[test]
    fn prior_regularizer_oracle_values() {
        let config = toy_config();
        let params = toy_params(&config, 13);
        let case = |mu: f64, sigma: f64| -> f64 {
            let mut g = Graph::new(&params, &config, false);
            let p = GaussianNodes {
                mu: g.tape.leaf(Tensor::vector(vec![mu])),
                log_sigma: g.tape.leaf(Tensor::vector(vec![libm::log(sigma)])),
                sigma: g.tape.leaf(Tensor::vector(vec![sigma])),
            };
            let l = prior_regularizer(&mut g, &p);
            g.value(l).item()
        };
        assert!((case(0.0, 1.0) - (-0.0001)).abs() < 1e-15);
        assert!((case(10_000.0, 1.0) - (-0.5001)).abs() < 1e-12);

        // 50-dim random input against a direct summation oracle.
        let mut r = rng::stream(14);
        let mu: Vec<f64> = (0..50).map(|_| r.random::<f64>() * 4.0 - 2.0).collect();
        let sd: Vec<f64> = (0..50).map(|_| 0.5 + r.random::<f64>()).collect();
        let mut g = Graph::new(&params, &config, false);
        let p = GaussianNodes {
            mu: g.tape.leaf(Tensor::vector(mu.clone())),
            log_sigma: g.tape.leaf(Tensor::vector(sd.iter().map(|s| libm::log(*s)).collect())),
            sigma: g.tape.leaf(Tensor::vector(sd.clone())),
        };
        let reg_node = prior_regularizer(&mut g, &p);
        let got = g.value(reg_node).item();
        let want: f64 = mu
            .iter()
            .zip(&sd)
            .map(|(m, s)| -m * m / (2.0 * SIGMA_MU * SIGMA_MU) + SIGMA_SIGMA * (libm::log(*s) - s))
            .sum();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn augment_produces_k_finite_triplets() {
        let config = toy_config();
        let params = toy_params(&config, 15);
        let o_r = Tensor::vector(vec![0.2, -0.5, 0.9, 0.4]);
        assert!(augment(&params, &config, &o_r, 0, &mut rng::stream(20)).is_empty());
        let eight = augment(&params, &config, &o_r, 8, &mut rng::stream(20));
        assert_eq!(eight.len(), 8);
        for t in &eight {
            assert_eq!(t.head.dims(), &[4]);
            assert_eq!(t.relation.dims(), &[4]);
            assert_eq!(t.tail.dims(), &[4]);
            assert!(t.head.all_finite() && t.relation.all_finite() && t.tail.all_finite());
        }
        let again = augment(&params, &config, &o_r, 8, &mut rng::stream(20));
        assert_eq!(eight, again);
        // Different draws differ.
        assert_ne!(eight[0], eight[1]);
    }

    #[test]
    fn tcvae_gradients_match_finite_differences() {
        let config = toy_config();
        let params = toy_params(&config, 16);
        let eps = Tensor::vector(vec![0.4, -1.1, 0.6]);
        let f = |p: &ParameterSet, want: bool| {
            let mut g = Graph::new(p, &config, want);
            let o = leaf_triplet(&mut g, 30);
            let q = recognize(&mut g, &o);
            let o_r = o.relation;
            let pr = prior(&mut g, o_r);
            let z = reparameterize(&mut g, &q, &eps);
            let gen = generate(&mut g, z, o_r);
            let rec = reconstruction_loss(&mut g, &o, gen);
            let kl = kl_divergence(&mut g, &q, &pr);
            let reg = prior_regularizer(&mut g, &pr);
            let a = ops::add(&mut g.tape, rec, kl);
            let loss = ops::add(&mut g.tape, a, reg);
            let value = g.value(loss).item();
            let grads = want.then(|| g.parameter_grads(loss));
            (value, grads)
        };
        let report = finite_difference_check(f, &params, 1e-4, 1e-3).unwrap();
        assert!(report.passed(), "max rel err {}", report.max_rel_err);
    }
}
