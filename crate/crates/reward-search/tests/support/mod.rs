//! Shared oracles for the acceptance suite: independent integrators, the
//! Wilcoxon sign-enumeration oracle, Pearson correlation, and the Pandora
//! dynamic-programming oracle plus a memoized policy simulator.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::ContinuousCDF;
use statrs::function::gamma::ln_gamma;

use reward_search::surrogate::{
    gittins_index, posterior_update, quad, NIGParams, ScoreSample, DEFAULT_EPSILON,
};

pub fn random_params(rng: &mut ChaCha8Rng) -> NIGParams {
    NIGParams::new(
        rng.gen_range(-2.0..2.0),
        rng.gen_range(0.1..3.0),
        rng.gen_range(0.6..5.0),
        rng.gen_range(0.2..4.0),
    )
    .unwrap()
}

pub fn random_logits(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-4.0..4.0)).collect()
}

pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

// ---------------------------------------------------------------------------
// Independent integrators
// ---------------------------------------------------------------------------

/// Classic recursive adaptive Simpson; independent of the crate's
/// Gauss-Kronrod integrator.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Total Student-t mass outside `[-bound, bound]` on the logit line, from an
/// independent CDF implementation.
pub fn student_t_tail_mass(df: f64, loc: f64, scale: f64, bound: f64) -> f64 {
    let t = statrs::distribution::StudentsT::new(loc, scale, df).expect("valid t parameters");
    t.cdf(-bound) + (1.0 - t.cdf(bound))
}

/// Log marginal likelihood by nested 2-D quadrature over `(mu, sigma^2)`,
/// with `sigma^2 = e^u` and the peak factored out for conditioning. The
/// closed form under test never touches this path.
pub fn lml_2d_quadrature_oracle(prior: &NIGParams, samples: &[ScoreSample]) -> f64 {
    let logits: Vec<f64> = samples.iter().map(|s| s.logit).collect();
    let n = logits.len() as f64;
    assert!(n >= 1.0);
    let post = posterior_update(prior, &logits).unwrap(); // bounds only

    let ln_normal = |x: f64, c: f64, var: f64| -> f64 {
        -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (x - c) * (x - c) / (2.0 * var)
    };
    // log joint over (u, mu): inverse-gamma prior on sigma^2 = e^u (with the
    // e^u change-of-variable term), the conditional normal prior on mu, and
    // the likelihood of every logit.
    let log_g = |u: f64, mu: f64| -> f64 {
        let sigma_sq = u.exp();
        let ln_ig = prior.a() * prior.b().ln() - ln_gamma(prior.a())
            - (prior.a() + 1.0) * u
            - prior.b() / sigma_sq;
        let mut total = ln_ig + u + ln_normal(mu, prior.m(), prior.v() * sigma_sq);
        for &l in &logits {
            total += ln_normal(l, mu, sigma_sq);
        }
        total
    };

    let u_peak = (post.b() / (post.a() + 1.0)).ln();
    let g_peak = log_g(u_peak, post.m());

    let u_lo = post.b().ln() - (post.a() + 40.0).ln() - 5.0;
    let u_hi = post.b().ln() + 50.0 / post.a() + 5.0;
    let outer = quad::integrate(
        |u: f64| {
            let sigma = (0.5 * u).exp();
            let half_width = 16.0 * sigma * post.v().sqrt().max(1e-6);
            quad::integrate(
                |mu: f64| (log_g(u, mu) - g_peak).exp(),
                post.m() - half_width,
                post.m() + half_width,
                1e-13,
                2000,
            )
            .unwrap()
        },
        u_lo,
        u_hi,
        1e-11,
        2000,
    )
    .unwrap();

    let jacobian: f64 = samples
        .iter()
        .map(|s| -(s.shrunk * (1.0 - s.shrunk)).ln())
        .sum();
    g_peak + outer.ln() + jacobian
}

// ---------------------------------------------------------------------------
// Statistics oracles
// ---------------------------------------------------------------------------

/// Exact two-sided Wilcoxon p by brute-force enumeration of all 2^n sign
/// patterns: both tail probabilities are counted directly.
pub fn wilcoxon_enumeration_oracle(x: &[f64], y: &[f64]) -> f64 {
    let diffs: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return 1.0;
    }
    let n = diffs.len();
    // Average ranks of |d|, doubled to integers.
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| abs[a].partial_cmp(&abs[b]).unwrap());
    let mut doubled = vec![0u64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && abs[order[j + 1]] == abs[order[i]] {
            j += 1;
        }
        let sum_positions: u64 = ((i + 1)..=(j + 1)).map(|p| p as u64).sum();
        let avg_doubled = 2 * sum_positions / (j - i + 1) as u64;
        for &idx in &order[i..=j] {
            doubled[idx] = avg_doubled;
        }
        i = j + 1;
    }
    let w_obs: u64 = diffs
        .iter()
        .zip(&doubled)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();
    let mut count_le = 0u64;
    let mut count_ge = 0u64;
    for mask in 0u64..(1 << n) {
        let w: u64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| doubled[i]).sum();
        if w <= w_obs {
            count_le += 1;
        }
        if w >= w_obs {
            count_ge += 1;
        }
    }
    let patterns = (1u64 << n) as f64;
    (2.0 * count_le.min(count_ge) as f64 / patterns).min(1.0)
}

/// Two-sided Wilcoxon p by Monte Carlo over random sign assignments, for
/// sample sizes where full enumeration is too large.
pub fn wilcoxon_monte_carlo_oracle(x: &[f64], y: &[f64], draws: usize, seed: u64) -> f64 {
    let diffs: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return 1.0;
    }
    let n = diffs.len();
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| abs[a].partial_cmp(&abs[b]).unwrap());
    let mut ranks = vec![0.0f64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && abs[order[j + 1]] == abs[order[i]] {
            j += 1;
        }
        let avg = ((i + 1 + j + 1) as f64) / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    let w_obs: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut count_le, mut count_ge) = (0u64, 0u64);
    for _ in 0..draws {
        let w: f64 = ranks.iter().filter(|_| rng.gen_bool(0.5)).sum();
        if w <= w_obs + 1e-9 {
            count_le += 1;
        }
        if w >= w_obs - 1e-9 {
            count_ge += 1;
        }
    }
    (2.0 * count_le.min(count_ge) as f64 / draws as f64).min(1.0)
}

/// Pearson correlation of scores with the 0/1 encoding of the labels.
pub fn pearson_on_encoding(binary: &[bool], scores: &[f64]) -> f64 {
    let n = binary.len() as f64;
    let xs: Vec<f64> = binary.iter().map(|b| f64::from(*b as u8)).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = scores.iter().sum::<f64>() / n;
    let cov: f64 = xs
        .iter()
        .zip(scores)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum();
    let vx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let vy: f64 = scores.iter().map(|y| (y - my) * (y - my)).sum();
    cov / (vx * vy).sqrt()
}

// ---------------------------------------------------------------------------
// Pandora's box: DP oracle and the surrogate stopping policy
// ---------------------------------------------------------------------------

/// A single-state inspection problem: iid draws from a discrete score
/// distribution, fixed cost per draw, keep the maximum on stopping.
pub struct PandoraInstance {
    pub atoms: &'static [(f64, f64)], // (value, probability)
    pub cost: f64,
}

/// Twenty instances frozen after margin verification: eight where stopping
/// after the first draw is optimal, twelve where the optimal rule keeps
/// drawing until the high atom appears.
pub const PANDORA_INSTANCES: [PandoraInstance; 20] = [
    PandoraInstance { atoms: &[(0.5, 1.0)], cost: 0.3 },
    PandoraInstance { atoms: &[(0.3, 0.5), (0.7, 0.5)], cost: 0.5 },
    PandoraInstance { atoms: &[(0.4, 0.3), (0.5, 0.4), (0.6, 0.3)], cost: 0.4 },
    PandoraInstance { atoms: &[(0.35, 0.25), (0.45, 0.25), (0.55, 0.25), (0.65, 0.25)], cost: 0.45 },
    PandoraInstance { atoms: &[(0.3, 0.2), (0.4, 0.2), (0.5, 0.2), (0.6, 0.2), (0.7, 0.2)], cost: 0.5 },
    PandoraInstance { atoms: &[(0.45, 0.5), (0.55, 0.5)], cost: 0.6 },
    PandoraInstance { atoms: &[(0.5, 0.7), (0.6, 0.3)], cost: 0.35 },
    PandoraInstance { atoms: &[(0.33, 0.4), (0.66, 0.6)], cost: 0.55 },
    PandoraInstance { atoms: &[(0.10, 0.7), (0.97, 0.3)], cost: 0.008 },
    PandoraInstance { atoms: &[(0.15, 0.6), (0.96, 0.4)], cost: 0.008 },
    PandoraInstance { atoms: &[(0.05, 0.75), (0.97, 0.25)], cost: 0.008 },
    PandoraInstance { atoms: &[(0.20, 0.5), (0.98, 0.5)], cost: 0.01 },
    PandoraInstance { atoms: &[(0.12, 0.65), (0.95, 0.35)], cost: 0.008 },
    PandoraInstance { atoms: &[(0.05, 0.3), (0.10, 0.4), (0.97, 0.3)], cost: 0.008 },
    PandoraInstance { atoms: &[(0.10, 0.35), (0.15, 0.35), (0.96, 0.3)], cost: 0.008 },
    PandoraInstance { atoms: &[(0.08, 0.5), (0.98, 0.5)], cost: 0.01 },
    PandoraInstance { atoms: &[(0.10, 0.6), (0.95, 0.4)], cost: 0.01 },
    PandoraInstance { atoms: &[(0.06, 0.45), (0.10, 0.25), (0.96, 0.3)], cost: 0.008 },
    PandoraInstance { atoms: &[(0.18, 0.55), (0.97, 0.45)], cost: 0.012 },
    PandoraInstance { atoms: &[(0.07, 0.25), (0.12, 0.25), (0.16, 0.2), (0.98, 0.3)], cost: 0.008 },
];

/// Optimal expected net payoff (payoff minus cost times draws, first draw
/// mandatory) by exhaustive backward induction over the sorted support.
pub fn dp_optimal_stopping(instance: &PandoraInstance) -> f64 {
    let mut sorted = instance.atoms.to_vec();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let k = sorted.len();
    let mut value = vec![0.0; k];
    value[0] = sorted[0].0;
    for j in 1..k {
        // Continuing from max = v_j: strictly higher atoms move the state,
        // others leave it; solve the one-unknown fixed point.
        let tail: f64 = (0..j).map(|i| sorted[i].1 * value[i]).sum();
        let p_gt: f64 = (0..j).map(|i| sorted[i].1).sum();
        let cont = (tail - instance.cost) / p_gt;
        value[j] = sorted[j].0.max(cont);
    }
    -instance.cost
        + sorted
            .iter()
            .zip(&value)
            .map(|((_, p), v)| p * v)
            .sum::<f64>()
}

/// The surrogate stopping policy (fresh posterior per state, stop when the
/// Gittins index is at or below the best observation), memoized over
/// observation count vectors.
pub struct PandoraPolicy<'a> {
    prior: &'a NIGParams,
    cost: f64,
    logits: Vec<f64>,
    memo: HashMap<Vec<u16>, f64>,
}

impl<'a> PandoraPolicy<'a> {
    pub fn new(prior: &'a NIGParams, instance: &PandoraInstance) -> Self {
        let logits = instance
            .atoms
            .iter()
            .map(|(v, _)| ScoreSample::new(*v, DEFAULT_EPSILON).unwrap().logit)
            .collect();
        Self {
            prior,
            cost: instance.cost,
            logits,
            memo: HashMap::new(),
        }
    }

    fn m_star(&mut self, counts: &[u16]) -> f64 {
        if let Some(&m) = self.memo.get(counts) {
            return m;
        }
        let obs: Vec<f64> = counts
            .iter()
            .enumerate()
            .flat_map(|(i, &c)| std::iter::repeat_n(self.logits[i], c as usize))
            .collect();
        let post = posterior_update(self.prior, &obs).unwrap();
        let m = gittins_index(&post, self.cost).unwrap();
        self.memo.insert(counts.to_vec(), m);
        m
    }

    /// One episode's net payoff under the policy.
    pub fn run_episode(&mut self, instance: &PandoraInstance, rng: &mut ChaCha8Rng) -> f64 {
        let mut counts = vec![0u16; instance.atoms.len()];
        let mut best = f64::NEG_INFINITY;
        let mut draws = 0usize;
        loop {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut pick = instance.atoms.len() - 1;
            for (i, (_, p)) in instance.atoms.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            counts[pick] += 1;
            draws += 1;
            best = best.max(instance.atoms[pick].0);
            if self.m_star(&counts) <= best || draws >= 5000 {
                break;
            }
        }
        best - self.cost * draws as f64
    }
}
