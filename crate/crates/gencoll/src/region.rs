//! The reliable throughput region: point evaluation, membership, boundary
//! certification, and single-link maximization.
//!
//! The region of a collision profile is the image of the open unit box under
//! `C_i(f) = f_i * prod_{j in I(i)} (1 - f_j)` together with everything those
//! points dominate. Point evaluation is exact over rationals. Everything
//! spectral or variational (`spectral_radius`, `solve_op2`, `membership`)
//! runs in floating point with explicit tolerances, because boundary points
//! are irrational in general.
//!
//! A duty vector `f` in the open box sits on the outer boundary exactly when
//! the spectral radius of `F(E+I)` equals one, where `F = diag(f)` and
//! `E[i][j] = 1` iff link `i` interferes with link `j`. The associated
//! Perron eigenvector, normalized so its first component is one, is the
//! multiplier vector of the maximization program solved by [`solve_op2`].

use crate::collision_graph::CollisionGraph;
use crate::linalg;
use crate::opt::{self, LogConstraint};
use crate::rational::Rat;
use num::{One, Zero};
use std::error::Error;
use std::fmt;

/// Default tolerance for spectral-radius comparisons.
pub const DEFAULT_RHO_TOL: f64 = 1e-9;
/// Default tolerance for optimality residuals.
pub const DEFAULT_KKT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub enum RegionError {
    WrongLength { expected: usize, got: usize },
    /// Component outside `[0,1]` (or not finite). Index is zero-based.
    DutyOutOfRange { index: usize },
    /// Component outside the open interval `(0,1)`. Index is zero-based.
    DutyNotInterior { index: usize },
    /// Target component negative, nonpositive where positivity is required,
    /// or not finite. Index is zero-based.
    TargetOutOfRange { index: usize },
    /// Multiplier vectors must have first component exactly 1.
    LambdaNotNormalized,
    /// No strictly feasible point exists for the requested targets.
    Infeasible { violation: f64 },
    /// An iterative routine missed its tolerance; the achieved bound is given.
    NoConvergence { achieved: f64 },
}

impl fmt::Display for RegionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegionError::WrongLength { expected, got } => {
                write!(f, "expected a vector of length {expected}, got {got}")
            }
            RegionError::DutyOutOfRange { index } => {
                write!(f, "duty factor of link {} is outside [0, 1]", index + 1)
            }
            RegionError::DutyNotInterior { index } => {
                write!(f, "duty factor of link {} must lie strictly inside (0, 1)", index + 1)
            }
            RegionError::TargetOutOfRange { index } => {
                write!(f, "throughput target for link {} is out of range", index + 1)
            }
            RegionError::LambdaNotNormalized => {
                write!(f, "multiplier vector must have first component 1")
            }
            RegionError::Infeasible { violation } => {
                write!(f, "targets are infeasible (constraint violation {violation:.3e})")
            }
            RegionError::NoConvergence { achieved } => {
                write!(f, "iteration budget exhausted (achieved bound {achieved:.3e})")
            }
        }
    }
}

impl Error for RegionError {}

// ------------------------------------------------------- point evaluation

/// Exact throughput point `C_i = f_i * prod_{j in I(i)} (1 - f_j)`.
pub fn throughput_point(duty: &[Rat], graph: &CollisionGraph) -> Result<Vec<Rat>, RegionError> {
    let m = graph.num_links();
    if duty.len() != m {
        return Err(RegionError::WrongLength { expected: m, got: duty.len() });
    }
    for (index, f) in duty.iter().enumerate() {
        if f < &Rat::zero() || f > &Rat::one() {
            return Err(RegionError::DutyOutOfRange { index });
        }
    }
    Ok((0..m)
        .map(|i| {
            let mut c = duty[i].clone();
            for &j in graph.collision_set(i) {
                c *= Rat::one() - &duty[j];
            }
            c
        })
        .collect())
}

/// Floating-point variant of [`throughput_point`].
pub fn throughput_point_f64(duty: &[f64], graph: &CollisionGraph) -> Result<Vec<f64>, RegionError> {
    let m = graph.num_links();
    if duty.len() != m {
        return Err(RegionError::WrongLength { expected: m, got: duty.len() });
    }
    for (index, &f) in duty.iter().enumerate() {
        if !f.is_finite() || !(0.0..=1.0).contains(&f) {
            return Err(RegionError::DutyOutOfRange { index });
        }
    }
    Ok(linear_throughput(duty, graph))
}

fn linear_throughput(duty: &[f64], graph: &CollisionGraph) -> Vec<f64> {
    (0..duty.len())
        .map(|i| {
            let mut c = duty[i];
            for &j in graph.collision_set(i) {
                c *= 1.0 - duty[j];
            }
            c
        })
        .collect()
}

// -------------------------------------------------------- spectral radius

#[derive(Debug, Clone)]
pub struct SpectralRadius {
    pub rho: f64,
    /// Half-width of the final bracketing interval around `rho`.
    pub error_bound: f64,
    /// Nonnegative eigenvector, normalized to unit maximum component.
    pub eigenvector: Vec<f64>,
    /// `max_i |(A x)_i - rho * x_i|` for the reported pair.
    pub eigen_residual: f64,
}

/// `A = F(E+I)`: row `i` is `f_i` times row `i` of the adjacency matrix plus
/// the identity.
fn system_matrix(duty: &[f64], graph: &CollisionGraph) -> Vec<Vec<f64>> {
    let m = duty.len();
    let e = graph.adjacency_matrix();
    (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let base = e[i][j] as f64 + if i == j { 1.0 } else { 0.0 };
                    duty[i] * base
                })
                .collect()
        })
        .collect()
}

/// True iff every eigenvalue of the nonnegative matrix `a` is smaller than
/// `s` in modulus. `sI - A` is then an M-matrix, equivalent to all leading
/// principal minors staying positive under plain elimination.
fn rho_less_than(a: &[Vec<f64>], s: f64) -> bool {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { s - a[i][j] } else { -a[i][j] })
                .collect()
        })
        .collect();
    for col in 0..n {
        let pivot = m[col][col];
        if pivot <= 0.0 {
            return false;
        }
        for row in col + 1..n {
            let factor = m[row][col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                m[row][k] -= factor * m[col][k];
            }
        }
    }
    true
}

fn spectral_radius_of(a: &[Vec<f64>], tol: f64) -> Result<SpectralRadius, RegionError> {
    let n = a.len();
    let mut lo = (0..n).map(|i| a[i][i]).fold(0.0f64, f64::max);
    let row_sum_max = a
        .iter()
        .map(|row| row.iter().sum::<f64>())
        .fold(0.0f64, f64::max);
    let mut hi = row_sum_max;
    let mut bump = (1e-12 * hi).max(1e-300);
    let mut attempts = 0;
    while !rho_less_than(a, hi) {
        hi += bump;
        bump *= 4.0;
        attempts += 1;
        if attempts > 80 {
            return Err(RegionError::NoConvergence { achieved: hi - lo });
        }
    }
    for _ in 0..200 {
        if hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if rho_less_than(a, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let rho = 0.5 * (lo + hi);
    let error_bound = (0.5 * (hi - lo)).max(f64::EPSILON * rho.abs());
    if error_bound > tol {
        return Err(RegionError::NoConvergence { achieved: error_bound });
    }

    // Inverse iteration with a shift just above the bracket. The shifted
    // matrix is a nonsingular M-matrix, so its inverse is nonnegative and
    // iterates stay nonnegative.
    let sigma = hi + (1e-11 * hi.max(1.0)).max(1e-300);
    let shifted: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { sigma - a[i][j] } else { -a[i][j] })
                .collect()
        })
        .collect();
    let mut x = vec![1.0; n];
    for _ in 0..200 {
        let y = match linalg::solve(shifted.clone(), x.clone()) {
            Some(y) => y,
            None => break,
        };
        let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            break;
        }
        let y: Vec<f64> = y.iter().map(|v| (v / scale).max(0.0)).collect();
        let delta = y
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        x = y;
        if delta <= 1e-15 {
            break;
        }
    }
    let ax = linalg::mat_vec(a, &x);
    let eigen_residual = ax
        .iter()
        .zip(&x)
        .map(|(av, xv)| (av - rho * xv).abs())
        .fold(0.0f64, f64::max);
    Ok(SpectralRadius { rho, error_bound, eigenvector: x, eigen_residual })
}

/// Spectral radius of `F(E+I)` with a nonnegative eigenvector.
///
/// Bisects on the M-matrix test above, which needs no irreducibility
/// assumption, then recovers the eigenvector by one shifted inverse
/// iteration. Requires `f` strictly inside the unit box.
pub fn spectral_radius(
    duty: &[f64],
    graph: &CollisionGraph,
    tol: f64,
) -> Result<SpectralRadius, RegionError> {
    ensure_length(duty, graph)?;
    ensure_open_box(duty)?;
    spectral_radius_of(&system_matrix(duty, graph), tol)
}

/// Exact test of whether `I - F(E+I)` is singular, i.e. whether 1 is an
/// eigenvalue of `F(E+I)`. Complements the floating-point boundary verdict
/// when the duty factors are rational.
pub fn exact_unit_eigenvalue(duty: &[Rat], graph: &CollisionGraph) -> Result<bool, RegionError> {
    let m = graph.num_links();
    if duty.len() != m {
        return Err(RegionError::WrongLength { expected: m, got: duty.len() });
    }
    for (index, f) in duty.iter().enumerate() {
        if f < &Rat::zero() || f > &Rat::one() {
            return Err(RegionError::DutyOutOfRange { index });
        }
    }
    let e = graph.adjacency_matrix();
    let mut mat: Vec<Vec<Rat>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let identity = if i == j { Rat::one() } else { Rat::zero() };
                    let system = &duty[i] * Rat::from_integer((e[i][j] as i64 + i64::from(i == j)).into());
                    identity - system
                })
                .collect()
        })
        .collect();
    let mut rank_row = 0;
    for col in 0..m {
        let pivot = match (rank_row..m).find(|&r| !mat[r][col].is_zero()) {
            Some(p) => p,
            None => return Ok(true),
        };
        mat.swap(rank_row, pivot);
        for row in rank_row + 1..m {
            if mat[row][col].is_zero() {
                continue;
            }
            let factor = &mat[row][col] / &mat[rank_row][col];
            for k in col..m {
                let sub = &factor * &mat[rank_row][k];
                mat[row][k] -= sub;
            }
        }
        rank_row += 1;
    }
    Ok(false)
}

// ------------------------------------------------------ boundary verdicts

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryVerdict {
    OnBoundary,
    Interior,
    /// A claimed achievable point turned out infeasible.
    ExteriorOfClaim,
    /// Some duty factor sits at 0 or 1, where the eigenvalue test does not
    /// classify the point.
    Degenerate,
}

impl fmt::Display for BoundaryVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryVerdict::OnBoundary => "on-boundary",
            BoundaryVerdict::Interior => "interior",
            BoundaryVerdict::ExteriorOfClaim => "exterior-of-claim",
            BoundaryVerdict::Degenerate => "degenerate",
        })
    }
}

#[derive(Debug, Clone)]
pub struct BoundaryCertificate {
    pub duty: Vec<f64>,
    pub rho: f64,
    pub rho_error_bound: f64,
    /// Candidate multiplier vector: the nonnegative eigenvector, scaled so
    /// the first component is 1 whenever that component is nonzero
    /// (max-normalized otherwise).
    pub lambda: Vec<f64>,
    /// Optimality residuals at tight targets; absent for degenerate inputs.
    pub residuals: Option<KktResiduals>,
    pub verdict: BoundaryVerdict,
}

/// Classifies `f` against the outer boundary: on it iff `|rho - 1| <= tol`.
/// Components at 0 or 1 yield [`BoundaryVerdict::Degenerate`] since the
/// eigenvalue criterion only covers the open box.
pub fn is_on_outer_boundary(
    duty: &[f64],
    graph: &CollisionGraph,
    tol: f64,
) -> Result<BoundaryCertificate, RegionError> {
    ensure_length(duty, graph)?;
    for (index, &f) in duty.iter().enumerate() {
        if !f.is_finite() || !(0.0..=1.0).contains(&f) {
            return Err(RegionError::DutyOutOfRange { index });
        }
    }
    let degenerate = duty.iter().any(|&f| f == 0.0 || f == 1.0);
    let spectral = spectral_radius_of(&system_matrix(duty, graph), tol.max(DEFAULT_RHO_TOL))?;
    let max_comp = spectral.eigenvector.iter().fold(0.0f64, |m, v| m.max(*v));
    let lambda: Vec<f64> = if spectral.eigenvector[0] > 1e-9 * max_comp {
        let head = spectral.eigenvector[0];
        spectral.eigenvector.iter().map(|v| (v / head).max(0.0)).collect()
    } else {
        spectral.eigenvector.clone()
    };
    let verdict = if degenerate {
        BoundaryVerdict::Degenerate
    } else if (spectral.rho - 1.0).abs() <= tol {
        BoundaryVerdict::OnBoundary
    } else {
        BoundaryVerdict::Interior
    };
    let residuals = if !degenerate && lambda[0] == 1.0 {
        let achieved = linear_throughput(duty, graph);
        kkt_residual(duty, &lambda, &achieved[1..], graph).ok()
    } else {
        None
    };
    Ok(BoundaryCertificate {
        duty: duty.to_vec(),
        rho: spectral.rho,
        rho_error_bound: spectral.error_bound,
        lambda,
        residuals,
        verdict,
    })
}

#[derive(Debug, Clone)]
pub struct Projection {
    /// The scaled duty vector `f / rho`, componentwise in `(0, 1]`.
    pub duty: Vec<f64>,
    pub rho_input: f64,
    pub rho_projected: f64,
    /// Zero-based links whose scaled duty factor reached 1, where the
    /// boundary criterion no longer classifies the point.
    pub degenerate_links: Vec<usize>,
}

/// Scales `f` by `1/rho`, landing on the outer boundary. The spectral radius
/// is positively homogeneous in `f`, so the result has radius 1 up to
/// floating-point error; components that reach 1 are flagged.
pub fn project_to_boundary(
    duty: &[f64],
    graph: &CollisionGraph,
    tol: f64,
) -> Result<Projection, RegionError> {
    ensure_length(duty, graph)?;
    ensure_open_box(duty)?;
    let spectral = spectral_radius_of(&system_matrix(duty, graph), tol.max(DEFAULT_RHO_TOL))?;
    let mut degenerate_links = Vec::new();
    let scaled: Vec<f64> = duty
        .iter()
        .enumerate()
        .map(|(i, &f)| {
            let v = f / spectral.rho;
            if v >= 1.0 - tol {
                degenerate_links.push(i);
                v.min(1.0)
            } else {
                v
            }
        })
        .collect();
    let projected = spectral_radius_of(&system_matrix(&scaled, graph), tol.max(DEFAULT_RHO_TOL))?;
    Ok(Projection {
        duty: scaled,
        rho_input: spectral.rho,
        rho_projected: projected.rho,
        degenerate_links,
    })
}

// ---------------------------------------------------- optimality residuals

#[derive(Debug, Clone, Copy)]
pub struct KktResiduals {
    /// Worst violation of the log-domain throughput constraints.
    pub primal: f64,
    /// Distance outside the open unit box (zero for interior points).
    pub interior: f64,
    /// Magnitude of the most negative multiplier.
    pub nonnegativity: f64,
    /// Worst `|lambda_k * constraint_k|` product.
    pub complementary: f64,
    /// `max_i |lambda_i - f_i * ((E+I) lambda)_i|`.
    pub stationarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.primal
            .max(self.interior)
            .max(self.nonnegativity)
            .max(self.complementary)
            .max(self.stationarity)
    }
}

/// Evaluates the five optimality conditions of the single-link maximization
/// program at `(f, lambda)` for targets on links 2..M.
///
/// `lambda` has length M with `lambda[0] == 1`; `targets` has length M-1 and
/// must be strictly positive. Stationarity is measured as the infinity norm
/// of `lambda - F(E+I) lambda`.
pub fn kkt_residual(
    duty: &[f64],
    lambda: &[f64],
    targets: &[f64],
    graph: &CollisionGraph,
) -> Result<KktResiduals, RegionError> {
    let m = graph.num_links();
    ensure_length(duty, graph)?;
    ensure_open_box(duty)?;
    if lambda.len() != m {
        return Err(RegionError::WrongLength { expected: m, got: lambda.len() });
    }
    if targets.len() != m - 1 {
        return Err(RegionError::WrongLength { expected: m - 1, got: targets.len() });
    }
    if lambda[0] != 1.0 {
        return Err(RegionError::LambdaNotNormalized);
    }
    for (index, &t) in targets.iter().enumerate() {
        if !t.is_finite() || t <= 0.0 {
            return Err(RegionError::TargetOutOfRange { index: index + 1 });
        }
    }
    let achieved = linear_throughput(duty, graph);
    let mut primal = 0.0f64;
    let mut complementary = 0.0f64;
    for k in 1..m {
        let c = targets[k - 1].ln() - achieved[k].ln();
        primal = primal.max(c);
        complementary = complementary.max((lambda[k] * c).abs());
    }
    primal = primal.max(0.0);
    let interior = duty
        .iter()
        .map(|&f| (-f).max(f - 1.0).max(0.0))
        .fold(0.0f64, f64::max);
    let nonnegativity = lambda
        .iter()
        .map(|&l| (-l).max(0.0))
        .fold(0.0f64, f64::max);
    let e = graph.adjacency_matrix();
    let stationarity = (0..m)
        .map(|i| {
            let mut s = lambda[i];
            for (k, &lk) in lambda.iter().enumerate() {
                if e[i][k] == 1 {
                    s += lk;
                }
            }
            (lambda[i] - duty[i] * s).abs()
        })
        .fold(0.0f64, f64::max);
    Ok(KktResiduals { primal, interior, nonnegativity, complementary, stationarity })
}

// -------------------------------------------------------------- membership

#[derive(Debug, Clone)]
pub enum Membership {
    /// A duty vector whose throughput dominates the targets within `tol`.
    Feasible { duty: Vec<f64>, achieved: Vec<f64> },
    /// Best effort failed; `violation` is the worst remaining shortfall at
    /// the best point found.
    Infeasible { violation: f64, best_duty: Vec<f64> },
}

/// Decides whether the throughput vector `targets` lies in the region, by
/// solving the log-domain feasibility program over all M links.
pub fn membership(
    targets: &[f64],
    graph: &CollisionGraph,
    tol: f64,
) -> Result<Membership, RegionError> {
    let m = graph.num_links();
    if targets.len() != m {
        return Err(RegionError::WrongLength { expected: m, got: targets.len() });
    }
    for (index, &t) in targets.iter().enumerate() {
        if !t.is_finite() || t < 0.0 {
            return Err(RegionError::TargetOutOfRange { index });
        }
    }
    let constraints: Vec<LogConstraint> = (0..m)
        .filter(|&k| targets[k] > 0.0)
        .map(|k| LogConstraint::for_link(graph, k, targets[k].ln()))
        .collect();
    let duty = if constraints.is_empty() {
        vec![0.5; m]
    } else {
        opt::find_interior_point(&constraints, m, -0.02, 1e-10).duty
    };
    let achieved = linear_throughput(&duty, graph);
    let violation = targets
        .iter()
        .zip(&achieved)
        .map(|(t, c)| t - c)
        .fold(f64::NEG_INFINITY, f64::max);
    if violation <= tol {
        Ok(Membership::Feasible { duty, achieved })
    } else {
        Ok(Membership::Infeasible { violation, best_duty: duty })
    }
}

// ------------------------------------------------- single-link maximization

#[derive(Debug, Clone)]
pub struct Op2Solution {
    /// Maximizing duty vector.
    pub duty: Vec<f64>,
    /// Throughput of link 1 at the optimum.
    pub objective: f64,
    /// Multipliers for all M links, first component pinned to 1.
    pub lambda: Vec<f64>,
    pub residuals: KktResiduals,
    /// True when the optimality residual met `tol`.
    pub converged: bool,
}

impl Op2Solution {
    pub fn kkt_residual(&self) -> f64 {
        self.residuals.max()
    }
}

/// Maximizes link 1's throughput subject to `C_k(f) >= targets[k-2]` for
/// links 2..M, over the open unit box.
///
/// The program is convex in the log domain. A barrier method produces the
/// optimum; Newton refinement on the active constraints then polishes both
/// the point and the multipliers, which are reported with `lambda[0] = 1`.
pub fn solve_op2(
    targets: &[f64],
    graph: &CollisionGraph,
    tol: f64,
) -> Result<Op2Solution, RegionError> {
    let m = graph.num_links();
    if targets.len() != m - 1 {
        return Err(RegionError::WrongLength { expected: m - 1, got: targets.len() });
    }
    for (index, &t) in targets.iter().enumerate() {
        if !t.is_finite() || t <= 0.0 {
            return Err(RegionError::TargetOutOfRange { index: index + 1 });
        }
    }
    let constraints: Vec<LogConstraint> = (1..m)
        .map(|k| LogConstraint::for_link(graph, k, targets[k - 1].ln()))
        .collect();
    let feasible = opt::find_interior_point(&constraints, m, -0.02, 1e-10);
    if feasible.slack >= -1e-9 {
        if !feasible.converged {
            return Err(RegionError::NoConvergence { achieved: feasible.slack });
        }
        let achieved = linear_throughput(&feasible.duty, graph);
        let worst = targets
            .iter()
            .enumerate()
            .map(|(i, t)| t - achieved[i + 1])
            .fold(0.0f64, f64::max);
        return Err(RegionError::Infeasible { violation: worst.max(feasible.slack.max(0.0)) });
    }
    let objective = LogConstraint::for_link(graph, 0, 0.0);
    let rough = opt::minimize_with_barrier(&objective, &constraints, &feasible.duty, 1e-10);
    let polished = opt::polish_active_set(&objective, &constraints, &rough.duty, &rough.multipliers);
    let (duty, mut multipliers, solver_ok) = if polished.converged {
        (polished.duty, polished.multipliers, rough.converged)
    } else {
        (rough.duty, rough.multipliers, false)
    };
    for m in &mut multipliers {
        *m = m.max(0.0);
    }
    let mut lambda = Vec::with_capacity(m);
    lambda.push(1.0);
    lambda.extend(multipliers);
    let residuals = kkt_residual(&duty, &lambda, targets, graph)?;
    let objective_value = linear_throughput(&duty, graph)[0];
    let converged = solver_ok && residuals.max() <= tol;
    Ok(Op2Solution { duty, objective: objective_value, lambda, residuals, converged })
}

// --------------------------------------------------- symmetric sum model

#[derive(Debug, Clone, Copy)]
pub struct SymmetricSum {
    /// `M * f * (1-f)^(N-1)` at the supplied duty factor.
    pub sum: f64,
    /// The maximizer `1/N`.
    pub optimal_duty: f64,
    /// `M * (1 - 1/N)^(N-1) / N`.
    pub max_sum: f64,
}

/// Sum throughput of M identical links that each see N-1 interferers, all
/// running the same duty factor.
pub fn symmetric_sum_throughput(links: u64, neighborhood: u64, duty: f64) -> SymmetricSum {
    assert!(links >= 1 && neighborhood >= 1);
    assert!(duty.is_finite() && (0.0..=1.0).contains(&duty));
    let m = links as f64;
    let n = neighborhood as f64;
    let exponent = (neighborhood - 1) as i32;
    SymmetricSum {
        sum: m * duty * (1.0 - duty).powi(exponent),
        optimal_duty: 1.0 / n,
        max_sum: m * (1.0 - 1.0 / n).powi(exponent) / n,
    }
}

// ------------------------------------------------------------- validation

fn ensure_length(duty: &[f64], graph: &CollisionGraph) -> Result<(), RegionError> {
    let m = graph.num_links();
    if duty.len() != m {
        return Err(RegionError::WrongLength { expected: m, got: duty.len() });
    }
    Ok(())
}

fn ensure_open_box(duty: &[f64]) -> Result<(), RegionError> {
    for (index, &f) in duty.iter().enumerate() {
        if !f.is_finite() || f <= 0.0 || f >= 1.0 {
            return Err(RegionError::DutyNotInterior { index });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{parse_rational, rat};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    const STAR3: &str = "M 3\nI 1: 2 3\nI 2: 1\nI 3: 1\n";

    fn star3() -> CollisionGraph {
        CollisionGraph::parse_profile(STAR3, false).unwrap()
    }

    fn rats(parts: &[&str]) -> Vec<Rat> {
        parts.iter().map(|p| parse_rational(p).unwrap()).collect()
    }

    #[test]
    fn throughput_point_matches_closed_forms() {
        let g = star3();
        let c = throughput_point(&rats(&["1/2", "1/2", "1/2"]), &g).unwrap();
        assert_eq!(c, rats(&["1/8", "1/4", "1/4"]));
        let c = throughput_point(&rats(&["3/8", "2/5", "2/5"]), &g).unwrap();
        assert_eq!(c, rats(&["27/200", "1/4", "1/4"]));
    }

    #[test]
    fn throughput_point_zeros_behave() {
        let g = star3();
        let c = throughput_point(&rats(&["0", "0", "0"]), &g).unwrap();
        assert!(c.iter().all(|v| v.is_zero()));
        // An interferer at duty 1 silences the link it collides with.
        let c = throughput_point(&rats(&["1", "1/2", "1/2"]), &g).unwrap();
        assert!(c[1].is_zero() && c[2].is_zero());
        assert_eq!(c[0], rat(1, 4));
    }

    #[test]
    fn throughput_point_rejects_bad_input() {
        let g = star3();
        let e = throughput_point(&rats(&["3/2", "1/2", "1/2"]), &g).unwrap_err();
        assert_eq!(e, RegionError::DutyOutOfRange { index: 0 });
        let e = throughput_point(&rats(&["1/2", "1/2"]), &g).unwrap_err();
        assert_eq!(e, RegionError::WrongLength { expected: 3, got: 2 });
    }

    #[test]
    fn throughput_is_monotone_in_the_right_directions() {
        let g = star3();
        let mut rng = StdRng::seed_from_u64(41);
        for _ in 0..50 {
            let f: Vec<f64> = (0..3).map(|_| rng.gen_range(0.05..0.9)).collect();
            let base = throughput_point_f64(&f, &g).unwrap();
            for i in 0..3 {
                let mut bumped = f.clone();
                bumped[i] += 0.05;
                let c = throughput_point_f64(&bumped, &g).unwrap();
                assert!(c[i] > base[i]);
                for k in 0..3 {
                    if g.collision_set(k).contains(&i) {
                        assert!(c[k] < base[k]);
                    }
                }
            }
        }
    }

    #[test]
    fn spectral_radius_on_the_star_profile() {
        let g = star3();
        let s = spectral_radius(&[0.5, 0.5, 0.5], &g, 1e-9).unwrap();
        let expected = (1.0 + 2.0f64.sqrt()) / 2.0;
        assert!((s.rho - expected).abs() < 1e-12);
        assert!(s.error_bound <= 1e-9);
        assert!(s.eigen_residual < 1e-10);
        // Eigenvector direction (1, 1/sqrt2, 1/sqrt2).
        let lambda: Vec<f64> = s.eigenvector.iter().map(|v| v / s.eigenvector[0]).collect();
        assert!((lambda[1] - 1.0 / 2.0f64.sqrt()).abs() < 1e-9);
        assert!((lambda[2] - 1.0 / 2.0f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn spectral_radius_sums_duty_on_multiple_access() {
        let mut rng = StdRng::seed_from_u64(42);
        for m in 2..=5 {
            let g = CollisionGraph::multiple_access(m).unwrap();
            for _ in 0..10 {
                let f: Vec<f64> = (0..m).map(|_| rng.gen_range(0.01..0.99)).collect();
                let s = spectral_radius(&f, &g, 1e-9).unwrap();
                let total: f64 = f.iter().sum();
                assert!((s.rho - total).abs() < 1e-11, "m={m} rho={} sum={}", s.rho, total);
            }
        }
    }

    #[test]
    fn spectral_radius_is_positively_homogeneous() {
        let g = star3();
        let f = [0.3, 0.45, 0.2];
        let base = spectral_radius(&f, &g, 1e-9).unwrap().rho;
        for c in [0.5, 1.5, 2.0] {
            let scaled: Vec<f64> = f.iter().map(|v| (v * c).min(0.999)).collect();
            if scaled.iter().zip(&f).any(|(s, v)| (s - v * c).abs() > 0.0) {
                continue;
            }
            let rho = spectral_radius(&scaled, &g, 1e-9).unwrap().rho;
            assert!((rho - c * base).abs() < 1e-11);
        }
        let two_link = CollisionGraph::multiple_access(2).unwrap();
        for c in [0.1, 0.25, 0.49] {
            let rho = spectral_radius(&[c, c], &two_link, 1e-9).unwrap().rho;
            assert!((rho - 2.0 * c).abs() < 1e-12);
        }
    }

    #[test]
    fn spectral_radius_dominates_every_duty_factor() {
        let g = star3();
        let mut rng = StdRng::seed_from_u64(43);
        for _ in 0..40 {
            let f: Vec<f64> = (0..3).map(|_| rng.gen_range(0.01..0.99)).collect();
            let s = spectral_radius(&f, &g, 1e-9).unwrap();
            let max_f = f.iter().fold(0.0f64, |m, v| m.max(*v));
            assert!(s.rho >= max_f - 1e-12);
        }
    }

    #[test]
    fn boundary_verdicts_for_the_star_profile() {
        let g = star3();
        let cert = is_on_outer_boundary(&[0.5, 0.5, 0.5], &g, 1e-9).unwrap();
        assert_eq!(cert.verdict, BoundaryVerdict::Interior);
        assert!((cert.rho - (1.0 + 2.0f64.sqrt()) / 2.0).abs() < 1e-10);

        let b = 1.0 / (1.0 + 2.0f64.sqrt());
        let cert = is_on_outer_boundary(&[b, b, b], &g, 1e-9).unwrap();
        assert_eq!(cert.verdict, BoundaryVerdict::OnBoundary);
        assert_eq!(cert.lambda[0], 1.0);
        assert!((cert.lambda[1] - 1.0 / 2.0f64.sqrt()).abs() < 1e-9);
        let res = cert.residuals.unwrap();
        assert!(res.max() <= 1e-9, "residuals {res:?}");
    }

    #[test]
    fn boundary_verdict_degenerate_at_the_box_edge() {
        let g = star3();
        let cert = is_on_outer_boundary(&[1.0, 0.5, 0.5], &g, 1e-9).unwrap();
        assert_eq!(cert.verdict, BoundaryVerdict::Degenerate);
        assert!(cert.residuals.is_none());
    }

    #[test]
    fn multiple_access_boundary_is_the_simplex() {
        let g = CollisionGraph::multiple_access(3).unwrap();
        let third = 1.0 / 3.0;
        let cert = is_on_outer_boundary(&[third, third, third], &g, 1e-9).unwrap();
        assert_eq!(cert.verdict, BoundaryVerdict::OnBoundary);
        let res = cert.residuals.unwrap();
        assert!(res.stationarity <= 1e-12);
    }

    #[test]
    fn projection_scales_onto_the_boundary() {
        let g = star3();
        let p = project_to_boundary(&[0.5, 0.5, 0.5], &g, 1e-9).unwrap();
        let b = 1.0 / (1.0 + 2.0f64.sqrt());
        for v in &p.duty {
            assert!((v - b).abs() < 1e-12);
        }
        assert!((p.rho_projected - 1.0).abs() < 1e-11);
        assert!(p.degenerate_links.is_empty());
        let c = throughput_point_f64(&p.duty, &g).unwrap();
        let r2 = 2.0f64.sqrt();
        assert!((c[0] - 2.0 / (1.0 + r2).powi(3)).abs() < 1e-12);
        assert!((c[1] - r2 / (1.0 + r2).powi(2)).abs() < 1e-12);
        assert!((c[2] - r2 / (1.0 + r2).powi(2)).abs() < 1e-12);
    }

    #[test]
    fn projection_is_identity_on_boundary_points() {
        let g = CollisionGraph::multiple_access(3).unwrap();
        let p = project_to_boundary(&[0.2, 0.2, 0.2], &g, 1e-9).unwrap();
        assert!((p.rho_input - 0.6).abs() < 1e-12);
        for v in &p.duty {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
        let again = project_to_boundary(&p.duty, &g, 1e-9).unwrap();
        for (a, b) in again.duty.iter().zip(&p.duty) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn projection_flags_components_that_reach_one() {
        let g = CollisionGraph::parse_profile("M 2\nI 2: 1\n", false).unwrap();
        let p = project_to_boundary(&[0.7, 0.3], &g, 1e-9).unwrap();
        assert!((p.rho_input - 0.7).abs() < 1e-12);
        assert_eq!(p.degenerate_links, vec![0]);
        assert!((p.duty[0] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn exact_singularity_test_agrees_with_the_float_verdict() {
        let ma = CollisionGraph::multiple_access(3).unwrap();
        assert!(exact_unit_eigenvalue(&rats(&["1/3", "1/3", "1/3"]), &ma).unwrap());
        assert!(!exact_unit_eigenvalue(&rats(&["1/2", "1/2", "1/2"]), &ma).unwrap());
        let g = star3();
        assert!(!exact_unit_eigenvalue(&rats(&["1/2", "1/2", "1/2"]), &g).unwrap());
        assert!(!exact_unit_eigenvalue(&rats(&["2/5", "2/5", "2/5"]), &g).unwrap());
    }

    #[test]
    fn kkt_residual_measures_single_term_stationarity() {
        // Link 1 has no interferers and nobody else carries multiplier mass,
        // so the stationarity row for link 1 reduces to |1 - f_1|.
        let g = CollisionGraph::parse_profile("M 2\nI 2: 1\n", false).unwrap();
        let eps = 1e-3;
        let res = kkt_residual(&[1.0 - eps, 0.5], &[1.0, 0.0], &[0.1], &g).unwrap();
        assert!((res.stationarity - eps).abs() < 1e-15);
        assert_eq!(res.nonnegativity, 0.0);
    }

    #[test]
    fn kkt_residual_requires_normalized_lambda() {
        let g = star3();
        let e = kkt_residual(&[0.5, 0.5, 0.5], &[2.0, 1.0, 1.0], &[0.1, 0.1], &g).unwrap_err();
        assert_eq!(e, RegionError::LambdaNotNormalized);
    }

    #[test]
    fn kkt_residual_is_tiny_at_the_known_boundary_optimum() {
        let g = star3();
        let b = 1.0 / (1.0 + 2.0f64.sqrt());
        let f = [b, b, b];
        let lam = [1.0, 1.0 / 2.0f64.sqrt(), 1.0 / 2.0f64.sqrt()];
        let c = throughput_point_f64(&f, &g).unwrap();
        let res = kkt_residual(&f, &lam, &c[1..], &g).unwrap();
        assert!(res.max() <= 1e-9, "{res:?}");
    }

    #[test]
    fn kkt_stationarity_is_positive_away_from_the_boundary() {
        let g = star3();
        let c = throughput_point_f64(&[0.5, 0.5, 0.5], &g).unwrap();
        for lam2 in [0.0, 0.5, 1.0, 2.0] {
            let res = kkt_residual(&[0.5, 0.5, 0.5], &[1.0, lam2, lam2], &c[1..], &g).unwrap();
            assert!(res.stationarity > 1e-3);
        }
    }

    #[test]
    fn membership_accepts_known_region_points() {
        let g = star3();
        for t in [[0.125, 0.25, 0.25], [0.135, 0.25, 0.25]] {
            match membership(&t, &g, 1e-7).unwrap() {
                Membership::Feasible { duty, achieved } => {
                    for (a, want) in achieved.iter().zip(&t) {
                        assert!(a >= &(want - 1e-7));
                    }
                    let direct = throughput_point_f64(&duty, &g).unwrap();
                    for (a, b) in direct.iter().zip(&achieved) {
                        assert!((a - b).abs() < 1e-12);
                    }
                }
                Membership::Infeasible { violation, .. } => {
                    panic!("expected feasible, got violation {violation}")
                }
            }
        }
    }

    #[test]
    fn membership_rejects_the_all_ones_vector() {
        let g = star3();
        match membership(&[1.0, 1.0, 1.0], &g, 1e-7).unwrap() {
            Membership::Infeasible { violation, .. } => assert!(violation > 0.1),
            Membership::Feasible { .. } => panic!("all-ones cannot be achievable"),
        }
    }

    #[test]
    fn membership_infeasibility_confirmed_by_grid_oracle() {
        // Independent coarse search: no duty vector on a 0.05 grid gets
        // within 0.25 of throughput 1 on every link.
        let g = star3();
        let steps: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        let mut best = f64::NEG_INFINITY;
        for &a in &steps {
            for &b in &steps {
                for &c in &steps {
                    let t = throughput_point_f64(&[a, b, c], &g).unwrap();
                    let worst = t.iter().fold(f64::INFINITY, |m, v| m.min(*v));
                    best = best.max(worst);
                }
            }
        }
        assert!(best < 0.75);
        match membership(&[1.0, 1.0, 1.0], &g, 1e-7).unwrap() {
            Membership::Infeasible { violation, .. } => assert!(violation >= 1.0 - best - 0.05),
            Membership::Feasible { .. } => panic!("grid oracle contradicts solver"),
        }
    }

    #[test]
    fn membership_handles_zero_targets() {
        let g = star3();
        match membership(&[0.0, 0.0, 0.0], &g, 1e-9).unwrap() {
            Membership::Feasible { .. } => {}
            Membership::Infeasible { .. } => panic!("origin is always in the region"),
        }
        let e = membership(&[-0.1, 0.0, 0.0], &g, 1e-9).unwrap_err();
        assert_eq!(e, RegionError::TargetOutOfRange { index: 0 });
    }

    #[test]
    fn solve_op2_beats_the_interior_point_on_equal_targets() {
        let g = star3();
        let sol = solve_op2(&[0.25, 0.25], &g, 1e-7).unwrap();
        assert!(sol.converged, "residuals {:?}", sol.residuals);
        assert!(sol.objective >= 27.0 / 200.0 - 1e-9);
        assert!(sol.objective > 0.125);
        let achieved = throughput_point_f64(&sol.duty, &g).unwrap();
        assert!(achieved[1] >= 0.25 - 1e-9 && achieved[2] >= 0.25 - 1e-9);
    }

    #[test]
    fn solve_op2_recovers_the_boundary_optimum() {
        let g = star3();
        let r2 = 2.0f64.sqrt();
        let t = r2 / (1.0 + r2).powi(2);
        let sol = solve_op2(&[t, t], &g, 1e-7).unwrap();
        assert!(sol.converged, "residuals {:?}", sol.residuals);
        let b = 1.0 / (1.0 + r2);
        for v in &sol.duty {
            assert!((v - b).abs() < 1e-8, "duty {:?}", sol.duty);
        }
        assert!((sol.objective - 2.0 / (1.0 + r2).powi(3)).abs() < 1e-9);
        assert!((sol.lambda[1] - 1.0 / r2).abs() < 1e-8);
        assert!((sol.lambda[2] - 1.0 / r2).abs() < 1e-8);
        assert!(sol.kkt_residual() <= 1e-7);
    }

    #[test]
    fn solve_op2_matches_the_two_link_closed_form() {
        let g = CollisionGraph::multiple_access(2).unwrap();
        for a in [0.25, 0.3, 0.5, 0.62] {
            let target = (1.0 - a) * (1.0 - a);
            let sol = solve_op2(&[target], &g, 1e-7).unwrap();
            assert!(sol.converged);
            assert!((sol.duty[0] - a).abs() < 1e-8, "a={a} duty {:?}", sol.duty);
            assert!((sol.duty[1] - (1.0 - a)).abs() < 1e-8);
            assert!((sol.objective - a * a).abs() < 1e-9);
        }
    }

    #[test]
    fn solve_op2_optimum_sits_on_the_outer_boundary() {
        let g = star3();
        let sol = solve_op2(&[0.25, 0.25], &g, 1e-7).unwrap();
        assert!(sol.lambda[1] > 0.0 && sol.lambda[2] > 0.0);
        let cert = is_on_outer_boundary(&sol.duty, &g, 1e-6).unwrap();
        assert_eq!(cert.verdict, BoundaryVerdict::OnBoundary);
    }

    #[test]
    fn solve_op2_rejects_impossible_targets() {
        // No link can carry more than one packet per slot.
        let g = star3();
        match solve_op2(&[1.2, 0.25], &g, 1e-7) {
            Err(RegionError::Infeasible { violation }) => assert!(violation > 0.15),
            other => panic!("expected infeasibility, got {other:?}"),
        }
        let e = solve_op2(&[0.0, 0.25], &g, 1e-7).unwrap_err();
        assert_eq!(e, RegionError::TargetOutOfRange { index: 1 });
    }

    #[test]
    fn symmetric_sum_closed_forms() {
        let s = symmetric_sum_throughput(10, 10, 0.1);
        assert!((s.sum - 0.9f64.powi(9)).abs() < 1e-15);
        assert!((s.sum - 0.387420489).abs() < 1e-9);
        assert!((s.optimal_duty - 0.1).abs() < 1e-15);
        assert!((s.max_sum - s.sum).abs() < 1e-15);

        let s = symmetric_sum_throughput(7, 1, 0.4);
        assert!((s.sum - 2.8).abs() < 1e-12);
        assert_eq!(s.optimal_duty, 1.0);
        assert!((s.max_sum - 7.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_sum_limit_approaches_inverse_e() {
        let inv_e = (-1.0f64).exp();
        let mut last = f64::INFINITY;
        for m in [10u64, 100, 1000] {
            let s = symmetric_sum_throughput(m, m, 1.0 / m as f64);
            assert!(s.max_sum < last);
            assert!(s.max_sum > inv_e);
            last = s.max_sum;
        }
        assert!((last - inv_e).abs() < 2.0 / 1000.0);
    }

    #[test]
    fn boundary_points_are_undominated_on_a_coarse_grid() {
        let g = star3();
        let p = project_to_boundary(&[0.5, 0.5, 0.5], &g, 1e-9).unwrap();
        let target = throughput_point_f64(&p.duty, &g).unwrap();
        let steps: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        for &a in &steps {
            for &b in &steps {
                for &c in &steps {
                    let t = throughput_point_f64(&[a, b, c], &g).unwrap();
                    assert!(
                        !(t[0] > target[0] && t[1] > target[1] && t[2] > target[2]),
                        "grid point [{a},{b},{c}] dominates the boundary point"
                    );
                }
            }
        }
    }
}
