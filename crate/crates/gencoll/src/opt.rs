//! Interior-point machinery behind the throughput-region solvers.
//!
//! Everything works in the log domain: a target `T` on link `k` becomes the
//! convex constraint `ln T - ln f_k - sum ln(1 - f_i) <= 0` over the open box
//! `(0,1)^M`. A damped-Newton barrier method produces a near-optimal point and
//! rough multipliers; an equality-constrained Newton polish on the detected
//! active set then sharpens both to near machine precision. The polish step
//! matters: barrier multipliers computed from slacks of order 1e-11 lose most
//! of their digits to cancellation.

use crate::collision_graph::CollisionGraph;
use crate::linalg;

const MU: f64 = 20.0;
const MAX_OUTER: usize = 48;
const MAX_INNER: usize = 80;

/// `value(f) = ln_target - ln f_link - sum_{i in interferers} ln(1 - f_i)`.
///
/// With `ln_target = ln T` this is the constraint "link throughput >= T" in
/// log form (nonpositive iff satisfied). With `ln_target = 0` it is the
/// objective `-ln C_link`, shared here because gradient and curvature have
/// the same shape.
pub(crate) struct LogConstraint {
    pub link: usize,
    pub interferers: Vec<usize>,
    pub ln_target: f64,
}

impl LogConstraint {
    pub(crate) fn for_link(graph: &CollisionGraph, link: usize, ln_target: f64) -> Self {
        LogConstraint {
            link,
            interferers: graph.collision_set(link).iter().copied().collect(),
            ln_target,
        }
    }

    pub(crate) fn value(&self, f: &[f64]) -> f64 {
        let mut v = self.ln_target - f[self.link].ln();
        for &i in &self.interferers {
            v -= (1.0 - f[i]).ln();
        }
        v
    }

    fn add_gradient(&self, f: &[f64], scale: f64, out: &mut [f64]) {
        out[self.link] += scale * (-1.0 / f[self.link]);
        for &i in &self.interferers {
            out[i] += scale / (1.0 - f[i]);
        }
    }

    /// Hessian of `value` is diagonal; adds `scale` times it to `diag`.
    fn add_curvature(&self, f: &[f64], scale: f64, diag: &mut [f64]) {
        diag[self.link] += scale / (f[self.link] * f[self.link]);
        for &i in &self.interferers {
            diag[i] += scale / ((1.0 - f[i]) * (1.0 - f[i]));
        }
    }

    fn fill_gradient(&self, f: &[f64], buf: &mut [f64]) {
        buf.iter_mut().for_each(|v| *v = 0.0);
        self.add_gradient(f, 1.0, buf);
    }
}

fn in_open_box(f: &[f64]) -> bool {
    f.iter().all(|&v| v > 0.0 && v < 1.0)
}

fn neg_dot(g: &[f64], d: &[f64]) -> f64 {
    -g.iter().zip(d).map(|(a, b)| a * b).sum::<f64>()
}

// ---------------------------------------------------------------- phase I

pub(crate) struct FeasiblePoint {
    pub duty: Vec<f64>,
    /// Final value of the auxiliary slack variable `s`; the infimum of the
    /// worst constraint value lies within the barrier gap below it.
    pub slack: f64,
    pub converged: bool,
}

/// Minimizes `s` subject to `c_k(f) <= s` over the open box, stopping early
/// once `s` drops below `early_exit_below` (proof of strict feasibility).
pub(crate) fn find_interior_point(
    constraints: &[LogConstraint],
    dims: usize,
    early_exit_below: f64,
    gap_tol: f64,
) -> FeasiblePoint {
    assert!(!constraints.is_empty());
    let mut f = vec![0.5; dims];
    let mut s = constraints
        .iter()
        .map(|c| c.value(&f))
        .fold(f64::NEG_INFINITY, f64::max)
        + 1.0;
    let m_total = (constraints.len() + 2 * dims) as f64;
    let mut t = 1.0;
    let mut converged = true;
    let mut done = false;
    for _ in 0..MAX_OUTER {
        if !newton_feasibility(t, constraints, &mut f, &mut s, early_exit_below) {
            converged = false;
            break;
        }
        if s < early_exit_below || m_total / t <= gap_tol {
            done = true;
            break;
        }
        t *= MU;
    }
    FeasiblePoint {
        duty: f,
        slack: s,
        converged: converged && done,
    }
}

fn feasibility_potential(t: f64, constraints: &[LogConstraint], f: &[f64], s: f64) -> f64 {
    if !in_open_box(f) {
        return f64::INFINITY;
    }
    let mut phi = t * s;
    for c in constraints {
        let u = s - c.value(f);
        if u <= 0.0 {
            return f64::INFINITY;
        }
        phi -= u.ln();
    }
    for &fj in f {
        phi -= fj.ln() + (1.0 - fj).ln();
    }
    phi
}

fn newton_feasibility(
    t: f64,
    constraints: &[LogConstraint],
    f: &mut Vec<f64>,
    s: &mut f64,
    early_exit_below: f64,
) -> bool {
    let n = f.len();
    let mut buf = vec![0.0; n];
    for _ in 0..MAX_INNER {
        if *s < early_exit_below {
            return true;
        }
        let mut g = vec![0.0; n + 1];
        let mut h = vec![vec![0.0; n + 1]; n + 1];
        g[n] = t;
        for c in constraints {
            let u = *s - c.value(f);
            if u <= 0.0 {
                return false;
            }
            c.add_gradient(f, 1.0 / u, &mut g[..n]);
            g[n] -= 1.0 / u;
            c.fill_gradient(f, &mut buf);
            let w = 1.0 / (u * u);
            for a in 0..n {
                if buf[a] == 0.0 {
                    continue;
                }
                for b in 0..n {
                    h[a][b] += w * buf[a] * buf[b];
                }
                h[a][n] -= w * buf[a];
                h[n][a] -= w * buf[a];
            }
            h[n][n] += w;
            let mut diag = vec![0.0; n];
            c.add_curvature(f, 1.0 / u, &mut diag);
            for (a, dv) in diag.into_iter().enumerate() {
                h[a][a] += dv;
            }
        }
        for j in 0..n {
            g[j] += -1.0 / f[j] + 1.0 / (1.0 - f[j]);
            h[j][j] += 1.0 / (f[j] * f[j]) + 1.0 / ((1.0 - f[j]) * (1.0 - f[j]));
        }
        let d = match linalg::solve(h, g.iter().map(|v| -v).collect()) {
            Some(d) => d,
            None => return false,
        };
        let decrement = neg_dot(&g, &d);
        if decrement <= 2e-12 {
            return true;
        }
        let phi0 = feasibility_potential(t, constraints, f, *s);
        let mut alpha = 1.0;
        let mut stepped = false;
        while alpha >= 1e-14 {
            let trial_f: Vec<f64> = f.iter().zip(&d).map(|(fi, di)| fi + alpha * di).collect();
            let trial_s = *s + alpha * d[n];
            if feasibility_potential(t, constraints, &trial_f, trial_s)
                <= phi0 - 0.25 * alpha * decrement
            {
                *f = trial_f;
                *s = trial_s;
                stepped = true;
                break;
            }
            alpha *= 0.5;
        }
        if !stepped {
            return true;
        }
    }
    true
}

// --------------------------------------------------------------- phase II

pub(crate) struct BarrierSolution {
    pub duty: Vec<f64>,
    pub multipliers: Vec<f64>,
    pub converged: bool,
}

/// Minimizes `objective.value(f)` subject to every constraint being
/// nonpositive, starting from a strictly feasible `start`.
pub(crate) fn minimize_with_barrier(
    objective: &LogConstraint,
    constraints: &[LogConstraint],
    start: &[f64],
    gap_tol: f64,
) -> BarrierSolution {
    let n = start.len();
    let mut f = start.to_vec();
    let m_total = (constraints.len() + 2 * n) as f64;
    let mut t = 1.0;
    let mut converged = true;
    let mut done = false;
    for _ in 0..MAX_OUTER {
        if !newton_barrier(t, objective, constraints, &mut f) {
            converged = false;
            break;
        }
        if m_total / t <= gap_tol {
            done = true;
            break;
        }
        t *= MU;
    }
    let multipliers = constraints
        .iter()
        .map(|c| {
            let u = (-c.value(&f)).max(f64::MIN_POSITIVE);
            1.0 / (t * u)
        })
        .collect();
    BarrierSolution {
        duty: f,
        multipliers,
        converged: converged && done,
    }
}

fn barrier_potential(
    t: f64,
    objective: &LogConstraint,
    constraints: &[LogConstraint],
    f: &[f64],
) -> f64 {
    if !in_open_box(f) {
        return f64::INFINITY;
    }
    let mut phi = t * objective.value(f);
    for c in constraints {
        let u = -c.value(f);
        if u <= 0.0 {
            return f64::INFINITY;
        }
        phi -= u.ln();
    }
    for &fj in f {
        phi -= fj.ln() + (1.0 - fj).ln();
    }
    phi
}

fn newton_barrier(
    t: f64,
    objective: &LogConstraint,
    constraints: &[LogConstraint],
    f: &mut Vec<f64>,
) -> bool {
    let n = f.len();
    let mut buf = vec![0.0; n];
    for _ in 0..MAX_INNER {
        let mut g = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut h = vec![vec![0.0; n]; n];
        objective.add_gradient(f, t, &mut g);
        objective.add_curvature(f, t, &mut diag);
        for c in constraints {
            let u = -c.value(f);
            if u <= 0.0 {
                return false;
            }
            c.add_gradient(f, 1.0 / u, &mut g);
            c.add_curvature(f, 1.0 / u, &mut diag);
            c.fill_gradient(f, &mut buf);
            let w = 1.0 / (u * u);
            for a in 0..n {
                if buf[a] == 0.0 {
                    continue;
                }
                for b in 0..n {
                    h[a][b] += w * buf[a] * buf[b];
                }
            }
        }
        for j in 0..n {
            g[j] += -1.0 / f[j] + 1.0 / (1.0 - f[j]);
            diag[j] += 1.0 / (f[j] * f[j]) + 1.0 / ((1.0 - f[j]) * (1.0 - f[j]));
            h[j][j] += diag[j];
        }
        let d = match linalg::solve(h, g.iter().map(|v| -v).collect()) {
            Some(d) => d,
            None => return false,
        };
        let decrement = neg_dot(&g, &d);
        if decrement <= 2e-12 {
            return true;
        }
        let phi0 = barrier_potential(t, objective, constraints, f);
        let mut alpha = 1.0;
        let mut stepped = false;
        while alpha >= 1e-14 {
            let trial: Vec<f64> = f.iter().zip(&d).map(|(fi, di)| fi + alpha * di).collect();
            if barrier_potential(t, objective, constraints, &trial)
                <= phi0 - 0.25 * alpha * decrement
            {
                *f = trial;
                stepped = true;
                break;
            }
            alpha *= 0.5;
        }
        if !stepped {
            return true;
        }
    }
    true
}

// ------------------------------------------------------- active-set polish

pub(crate) struct RefinedOptimum {
    pub duty: Vec<f64>,
    /// One multiplier per constraint; zero on the inactive ones.
    pub multipliers: Vec<f64>,
    pub converged: bool,
}

/// Sharpens a barrier solution by Newton's method on the KKT equalities of
/// the detected active set. Drops constraints whose multiplier comes back
/// negative and re-adds any that the polished point violates.
pub(crate) fn polish_active_set(
    objective: &LogConstraint,
    constraints: &[LogConstraint],
    duty0: &[f64],
    mult0: &[f64],
) -> RefinedOptimum {
    let mut active: Vec<bool> = constraints
        .iter()
        .zip(mult0)
        .map(|(c, &m)| c.value(duty0) >= -1e-4 || m > 1e-3)
        .collect();
    let mut best = RefinedOptimum {
        duty: duty0.to_vec(),
        multipliers: mult0.to_vec(),
        converged: false,
    };
    for _ in 0..constraints.len() + 1 {
        let idx: Vec<usize> = (0..constraints.len()).filter(|&k| active[k]).collect();
        let start_nu: Vec<f64> = idx.iter().map(|&k| mult0[k].max(0.0)).collect();
        let solved = match newton_equality(objective, constraints, &idx, duty0, &start_nu) {
            Some(s) => s,
            None => return best,
        };
        let (duty, nu) = solved;
        if let Some(worst) = idx
            .iter()
            .enumerate()
            .filter(|&(pos, _)| nu[pos] < -1e-9)
            .min_by(|a, b| nu[a.0].total_cmp(&nu[b.0]))
        {
            active[*worst.1] = false;
            continue;
        }
        let mut violated = false;
        for (k, c) in constraints.iter().enumerate() {
            if !active[k] && c.value(&duty) > 1e-10 {
                active[k] = true;
                violated = true;
            }
        }
        if violated {
            continue;
        }
        let mut multipliers = vec![0.0; constraints.len()];
        for (pos, &k) in idx.iter().enumerate() {
            multipliers[k] = nu[pos].max(0.0);
        }
        best = RefinedOptimum {
            duty,
            multipliers,
            converged: true,
        };
        return best;
    }
    best
}

/// Newton on the square system: gradient of the Lagrangian vanishes and the
/// selected constraints hold with equality. Returns the polished duty vector
/// and the multipliers of the selected constraints.
fn newton_equality(
    objective: &LogConstraint,
    constraints: &[LogConstraint],
    idx: &[usize],
    duty0: &[f64],
    nu0: &[f64],
) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = duty0.len();
    let na = idx.len();
    let dim = n + na;
    let mut f = duty0.to_vec();
    let mut nu = nu0.to_vec();
    let mut buf = vec![0.0; n];

    let residual = |f: &[f64], nu: &[f64]| -> Vec<f64> {
        let mut r = vec![0.0; dim];
        objective.add_gradient(f, 1.0, &mut r[..n]);
        for (pos, &k) in idx.iter().enumerate() {
            constraints[k].add_gradient(f, nu[pos], &mut r[..n]);
            r[n + pos] = constraints[k].value(f);
        }
        r
    };
    let norm = |r: &[f64]| r.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let mut r = residual(&f, &nu);
    let mut rn = norm(&r);
    for _ in 0..60 {
        if rn <= 1e-13 {
            break;
        }
        let mut jac = vec![vec![0.0; dim]; dim];
        let mut diag = vec![0.0; n];
        objective.add_curvature(&f, 1.0, &mut diag);
        for (pos, &k) in idx.iter().enumerate() {
            constraints[k].add_curvature(&f, nu[pos], &mut diag);
            constraints[k].fill_gradient(&f, &mut buf);
            for a in 0..n {
                jac[a][n + pos] = buf[a];
                jac[n + pos][a] = buf[a];
            }
        }
        for (a, dv) in diag.iter().enumerate() {
            jac[a][a] = *dv;
        }
        let step = linalg::solve(jac, r.iter().map(|v| -v).collect())?;
        let mut alpha = 1.0f64;
        let mut accepted = false;
        while alpha >= 1e-12 {
            let tf: Vec<f64> = f.iter().zip(&step[..n]).map(|(a, d)| a + alpha * d).collect();
            if in_open_box(&tf) {
                let tn: Vec<f64> = nu
                    .iter()
                    .zip(&step[n..])
                    .map(|(a, d)| a + alpha * d)
                    .collect();
                let tr = residual(&tf, &tn);
                let trn = norm(&tr);
                if trn <= (1.0 - 0.25 * alpha) * rn || trn <= 1e-13 {
                    f = tf;
                    nu = tn;
                    r = tr;
                    rn = trn;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if rn <= 1e-9 {
        Some((f, nu))
    } else {
        None
    }
}
