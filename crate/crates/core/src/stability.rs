//! Rest points of the replicator dynamics and their stability.
//!
//! The verdict of [`classify`] comes from the eigenvalues of the numeric
//! Jacobian restricted to the tangent space of the simplex. The closed-form
//! two-pool quantities (principal-minor determinants, large-population
//! conditions) are evaluated alongside and reported as they are, together
//! with a flag when they disagree with the numeric verdict.

use std::fmt;
use std::io::Write;

use nalgebra::{Complex, DMatrix, Matrix2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{PoolGame, PopulationState};
use crate::replicator::fmt_sig;

type Complex64 = Complex<f64>;

/// Residual below which a state counts as a rest point.
pub const REST_TOL: f64 = 1e-9;
/// Threshold on tangent eigenvalue real parts, scaled by `max(1, |J|)`.
pub const EIGEN_TOL: f64 = 1e-9;
/// Relative finite-difference step.
pub const FD_STEP: f64 = 1e-6;

/// Reward weights `a` and `b` of the two pools,
/// `(R + rho s_i) omega_i exp(-tau(s_i)/T)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TheoremCoefficients {
    pub a: f64,
    pub b: f64,
}

pub fn coefficients_ab(game: &PoolGame) -> Result<TheoremCoefficients> {
    game.require_two_pools()?;
    Ok(TheoremCoefficients {
        a: game.reward_weight(0),
        b: game.reward_weight(1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RestPointKind {
    Vertex,
    Interior,
}

impl fmt::Display for RestPointKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RestPointKind::Vertex => "vertex",
            RestPointKind::Interior => "interior",
        })
    }
}

/// Candidate rest point of the two-pool game, before classification.
#[derive(Debug, Clone, PartialEq)]
pub struct RestPoint {
    /// Pool-1 share. May lie outside `[0, 1]` for an infeasible interior point.
    pub x1: f64,
    pub kind: RestPointKind,
    pub feasible: bool,
}

impl RestPoint {
    pub fn state(&self) -> Option<PopulationState> {
        if self.feasible {
            PopulationState::two_pool(self.x1).ok()
        } else {
            None
        }
    }
}

/// Interior pool-1 share `(a - b) / (N p (w1 - w2)^2) - w2 / (w1 - w2)`.
pub fn interior_closed_form(game: &PoolGame) -> Result<f64> {
    let TheoremCoefficients { a, b } = coefficients_ab(game)?;
    let (w1, w2) = (game.strategies[0].omega, game.strategies[1].omega);
    if w1 == w2 {
        return Err(Error::DegenerateStrategies(
            "equal hash-rate requirements make the interior formula singular".into(),
        ));
    }
    let n = game.params.population as f64;
    let p = game.params.power_price;
    Ok((a - b) / (n * p * (w1 - w2).powi(2)) - w2 / (w1 - w2))
}

/// The two vertices plus the closed-form interior point, which is flagged
/// feasible only when it lies strictly inside `(0, 1)`.
pub fn rest_points_two_pool(game: &PoolGame) -> Result<Vec<RestPoint>> {
    let x = interior_closed_form(game)?;
    Ok(vec![
        RestPoint { x1: 0.0, kind: RestPointKind::Vertex, feasible: true },
        RestPoint { x1: 1.0, kind: RestPointKind::Vertex, feasible: true },
        RestPoint {
            x1: x,
            kind: RestPointKind::Interior,
            feasible: x > 0.0 && x < 1.0,
        },
    ])
}

/// Interior root of the reduced two-pool bracket by bisection.
///
/// `Ok(None)` when the bracket has no sign change on `(0, 1)`, which
/// includes the case where it vanishes identically.
pub fn interior_by_bisection(game: &PoolGame, tol: f64) -> Result<Option<f64>> {
    game.require_two_pools()?;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let (flo, fhi) = (game.reduced_bracket(lo), game.reduced_bracket(hi));
    if flo == 0.0 || fhi == 0.0 || flo.signum() == fhi.signum() {
        return Ok(None);
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = game.reduced_bracket(mid);
        if fm == 0.0 {
            return Ok(Some(mid));
        }
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Two-pool rest points, falling back to bisection when the closed form is
/// singular (equal hash-rate requirements).
pub fn find_rest_points_two_pool(game: &PoolGame) -> Result<Vec<RestPoint>> {
    match rest_points_two_pool(game) {
        Err(Error::DegenerateStrategies(_)) => {
            let mut pts = vec![
                RestPoint { x1: 0.0, kind: RestPointKind::Vertex, feasible: true },
                RestPoint { x1: 1.0, kind: RestPointKind::Vertex, feasible: true },
            ];
            if let Some(x) = interior_by_bisection(game, 1e-12)? {
                pts.push(RestPoint { x1: x, kind: RestPointKind::Interior, feasible: true });
            }
            Ok(pts)
        }
        other => other,
    }
}

/// Closed-form partial derivatives `df_i/dx_j` of the two-pool replicator
/// field, with `x_1` and `x_2` treated as independent coordinates.
pub fn jacobian_two_pool_analytic(game: &PoolGame, x: &[f64]) -> Result<Matrix2<f64>> {
    let TheoremCoefficients { a, b } = coefficients_ab(game)?;
    if x.len() != 2 {
        return Err(Error::UnsupportedShape { expected: 2, got: x.len() });
    }
    let (w1, w2) = (game.strategies[0].omega, game.strategies[1].omega);
    let n = game.params.population as f64;
    let p = game.params.power_price;
    let (x1, x2) = (x[0], x[1]);
    let s = w1 * x1 + w2 * x2;
    let ns = n * s;
    let ns2 = n * s * s;

    let j11 = (1.0 - 2.0 * x1) * (a / ns - p * w1) - a * w1 * (x1 - x1 * x1) / ns2
        - b * w2 * x2 * x2 / ns2
        + p * w2 * x2;
    let j12 = x1 * (p * w2 - a * w2 * (1.0 - x1) / ns2 + b * w2 * x2 / ns2 - b / ns);
    let j21 = x2 * (p * w1 + a * w1 * x1 / ns2 - b * w1 * (1.0 - x2) / ns2 - a / ns);
    let j22 = (1.0 - 2.0 * x2) * (b / ns - p * w2) - b * w2 * (x2 - x2 * x2) / ns2
        - a * w1 * x1 * x1 / ns2
        + p * w1 * x1;
    Ok(Matrix2::new(j11, j12, j21, j22))
}

/// Central-difference Jacobian of the replicator field, step
/// `FD_STEP * max(1, |x_j|)` per coordinate.
pub fn jacobian_numeric(game: &PoolGame, x: &[f64]) -> DMatrix<f64> {
    let m = x.len();
    let mut jac = DMatrix::zeros(m, m);
    let mut probe = x.to_vec();
    for j in 0..m {
        let h = FD_STEP * x[j].abs().max(1.0);
        probe[j] = x[j] + h;
        let fp = game.replicator_rhs_raw(&probe);
        probe[j] = x[j] - h;
        let fm = game.replicator_rhs_raw(&probe);
        probe[j] = x[j];
        for i in 0..m {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

/// Which two-pool rest point a principal-minor test refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LemmaPoint {
    /// `x* = 0`, everyone in pool 2.
    VertexZero,
    /// `x* = 1`: the `VertexZero` test with the pool labels swapped.
    VertexOne,
    Interior,
}

/// Closed-form principal-minor determinants and the sign test
/// `det J11 < 0 && det J > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MinorConditions {
    pub det_j11: f64,
    pub det_j: f64,
    pub pass: bool,
}

pub fn lemma1_conditions(game: &PoolGame, which: LemmaPoint) -> Result<MinorConditions> {
    let TheoremCoefficients { a, b } = coefficients_ab(game)?;
    let (w1, w2) = (game.strategies[0].omega, game.strategies[1].omega);
    let n = game.params.population as f64;
    let p = game.params.power_price;
    let vertex = |a: f64, b: f64, w1: f64, w2: f64| {
        let d11 = (a - b) / (n * w2) - p * (w1 - w2);
        (d11, d11 * (p * w2 - b / (n * w2)))
    };
    let (det_j11, det_j) = match which {
        LemmaPoint::VertexZero => vertex(a, b, w1, w2),
        LemmaPoint::VertexOne => vertex(b, a, w2, w1),
        LemmaPoint::Interior => {
            let c = a - b + n * p * w2 * (w2 - w1);
            let d11 = c * (a * (w1 + w2) + w1 * (-2.0 * b + n * p * w1 * (w2 - w1)))
                / (n * (a - b) * (w1 - w2).powi(2));
            let dj = p * c * (-b * w1 + a * w2) * (a - b + n * p * w1 * (w2 - w1))
                / (n * (a - b).powi(2) * (w1 - w2));
            (d11, dj)
        }
    };
    Ok(MinorConditions {
        det_j11,
        det_j,
        pass: det_j11 < 0.0 && det_j > 0.0,
    })
}

/// Large-population interior conditions `a - b < 0` and
/// `(b w1 - a w2)(w2 - w1) > 0`, with the raw quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticConditions {
    pub a_minus_b: f64,
    pub cross_term: f64,
    /// `b w1 - a w2` alone; zero whenever both pools use the same block size.
    pub b_w1_minus_a_w2: f64,
    pub a_minus_b_negative: bool,
    pub cross_product_positive: bool,
    /// At least one of the two quantities is zero (to relative 1e-12).
    pub degenerate: bool,
}

impl AsymptoticConditions {
    pub fn both_hold(&self) -> bool {
        self.a_minus_b_negative && self.cross_product_positive
    }
}

pub fn theorem2_asymptotic(game: &PoolGame) -> Result<AsymptoticConditions> {
    let TheoremCoefficients { a, b } = coefficients_ab(game)?;
    let (w1, w2) = (game.strategies[0].omega, game.strategies[1].omega);
    let a_minus_b = a - b;
    let bw_aw = b * w1 - a * w2;
    let cross_term = bw_aw * (w2 - w1);
    let scale_ab = a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
    let scale_cross = (b * w1).abs().max((a * w2).abs()).max(f64::MIN_POSITIVE);
    let degenerate = a_minus_b.abs() <= 1e-12 * scale_ab
        || bw_aw.abs() <= 1e-12 * scale_cross
        || w1 == w2;
    Ok(AsymptoticConditions {
        a_minus_b,
        cross_term,
        b_w1_minus_a_w2: bw_aw,
        a_minus_b_negative: a_minus_b < 0.0,
        cross_product_positive: cross_term > 0.0,
        degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "ESS")]
    Ess,
    #[serde(rename = "non-ESS")]
    NonEss,
    #[serde(rename = "degenerate")]
    Degenerate,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Ess => "ESS",
            Verdict::NonEss => "non-ESS",
            Verdict::Degenerate => "degenerate",
        })
    }
}

/// Full stability report for one rest point.
#[derive(Debug, Clone, PartialEq)]
pub struct RestPointReport {
    pub x_star: PopulationState,
    pub kind: RestPointKind,
    pub feasible: bool,
    pub residual: f64,
    pub jacobian_analytic: Option<Matrix2<f64>>,
    pub jacobian_numeric: DMatrix<f64>,
    /// Eigenvalues of the Jacobian restricted to the simplex tangent space.
    pub tangent_eigenvalues: Vec<Complex64>,
    /// Derivative of the reduced one-dimensional two-pool field at `x*`.
    pub reduced_eigen: Option<f64>,
    pub lemma1: Option<MinorConditions>,
    pub theorem2: Option<AsymptoticConditions>,
    pub verdict: Verdict,
    /// The closed-form conditions reach a different conclusion than
    /// `verdict`.
    pub printed_conditions_disagree: bool,
}

/// Orthonormal basis (M x M-1) of `{v : sum v = 0}`.
fn tangent_basis(m: usize) -> DMatrix<f64> {
    let mut raw = DMatrix::zeros(m, m - 1);
    for k in 0..m - 1 {
        raw[(k, k)] = 1.0;
        raw[(m - 1, k)] = -1.0;
    }
    raw.qr().q()
}

/// Eigenvalues of `Q^T J Q` for the tangent basis `Q`.
pub fn tangent_eigenvalues(jac: &DMatrix<f64>) -> Vec<Complex64> {
    let m = jac.nrows();
    if m < 2 {
        return Vec::new();
    }
    let q = tangent_basis(m);
    let reduced = q.transpose() * jac * &q;
    let mut eig: Vec<Complex64> = reduced.complex_eigenvalues().iter().copied().collect();
    eig.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    eig
}

fn verdict_from(eigs: &[Complex64], jac_norm: f64) -> Verdict {
    let tol = EIGEN_TOL * jac_norm.max(1.0);
    if eigs.is_empty() {
        Verdict::Degenerate
    } else if eigs.iter().all(|e| e.re < -tol) {
        Verdict::Ess
    } else if eigs.iter().any(|e| e.re > tol) {
        Verdict::NonEss
    } else {
        Verdict::Degenerate
    }
}

/// Derivative of `g(x) = x (1 - x) h(x)` for the two-pool reduced field.
pub fn reduced_derivative(game: &PoolGame, x1: f64) -> Result<f64> {
    let TheoremCoefficients { a, b } = coefficients_ab(game)?;
    let (w1, w2) = (game.strategies[0].omega, game.strategies[1].omega);
    let n = game.params.population as f64;
    let s = w1 * x1 + w2 * (1.0 - x1);
    let h = game.reduced_bracket(x1);
    let dh = -(a - b) * (w1 - w2) / (n * s * s);
    Ok((1.0 - 2.0 * x1) * h + x1 * (1.0 - x1) * dh)
}

/// Classifies a rest point `x_star`.
pub fn classify(game: &PoolGame, x_star: &PopulationState) -> Result<RestPointReport> {
    if x_star.pools() != game.pools() {
        return Err(Error::UnsupportedShape {
            expected: game.pools(),
            got: x_star.pools(),
        });
    }
    let residual = game.rhs_norm(x_star.shares());
    if !(residual < REST_TOL) {
        return Err(Error::NotRestPoint { residual });
    }
    let kind = if x_star.is_vertex() {
        RestPointKind::Vertex
    } else {
        RestPointKind::Interior
    };
    let jac = jacobian_numeric(game, x_star.shares());
    let eigs = tangent_eigenvalues(&jac);
    let mut verdict = verdict_from(&eigs, jac.norm());

    let mut report = RestPointReport {
        x_star: x_star.clone(),
        kind,
        feasible: true,
        residual,
        jacobian_analytic: None,
        jacobian_numeric: jac,
        tangent_eigenvalues: eigs,
        reduced_eigen: None,
        lemma1: None,
        theorem2: None,
        verdict,
        printed_conditions_disagree: false,
    };

    if game.pools() == 2 {
        let x1 = x_star[0];
        let g1 = reduced_derivative(game, x1)?;
        // the reduced 1-D derivative must tell the same story
        let tol = EIGEN_TOL * report.jacobian_numeric.norm().max(1.0);
        let reduced_verdict = if g1 < -tol {
            Verdict::Ess
        } else if g1 > tol {
            Verdict::NonEss
        } else {
            Verdict::Degenerate
        };
        if reduced_verdict != verdict {
            verdict = Verdict::Degenerate;
        }
        report.reduced_eigen = Some(g1);
        report.jacobian_analytic = Some(jacobian_two_pool_analytic(game, x_star.shares())?);

        let which = match kind {
            RestPointKind::Vertex if x1 == 0.0 => Some(LemmaPoint::VertexZero),
            RestPointKind::Vertex => Some(LemmaPoint::VertexOne),
            RestPointKind::Interior => {
                // the printed interior expressions divide by a - b and w1 - w2
                let w_differ = game.strategies[0].omega != game.strategies[1].omega;
                let ab = coefficients_ab(game)?;
                (w_differ && ab.a != ab.b).then_some(LemmaPoint::Interior)
            }
        };
        report.lemma1 = which.map(|w| lemma1_conditions(game, w)).transpose()?;
        report.verdict = verdict;
        report.printed_conditions_disagree = match kind {
            // large-population claim: vertices are never ESS
            RestPointKind::Vertex => verdict == Verdict::Ess,
            RestPointKind::Interior => {
                let t2 = theorem2_asymptotic(game)?;
                report.theorem2 = Some(t2);
                t2.both_hold() != (verdict == Verdict::Ess)
                    || report.lemma1.is_some_and(|l| l.pass != (verdict == Verdict::Ess))
            }
        };
    }
    Ok(report)
}

fn opt_sig(v: Option<f64>) -> String {
    v.map(fmt_sig).unwrap_or_default()
}

fn opt_bool(v: Option<bool>) -> String {
    v.map(|b| b.to_string()).unwrap_or_default()
}

impl RestPointReport {
    pub fn csv_header(pools: usize) -> Vec<String> {
        let mut h: Vec<String> = (1..=pools).map(|i| format!("x_star_{i}")).collect();
        h.extend(
            ["kind", "feasible", "detJ11", "detJ", "t2_cond1", "t2_cond2", "reduced_eig", "verdict"]
                .map(String::from),
        );
        h
    }

    pub fn csv_row(&self) -> Vec<String> {
        let mut row: Vec<String> = self.x_star.shares().iter().map(|&v| fmt_sig(v)).collect();
        row.push(self.kind.to_string());
        row.push(self.feasible.to_string());
        row.push(opt_sig(self.lemma1.map(|l| l.det_j11)));
        row.push(opt_sig(self.lemma1.map(|l| l.det_j)));
        row.push(opt_bool(self.theorem2.map(|t| t.a_minus_b_negative)));
        row.push(opt_bool(self.theorem2.map(|t| t.cross_product_positive)));
        row.push(opt_sig(self.reduced_eigen));
        row.push(self.verdict.to_string());
        row
    }

    /// `key = value` lines describing the report.
    pub fn write_key_values<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let joined = |v: &[f64]| v.iter().map(|&x| fmt_sig(x)).collect::<Vec<_>>().join(", ");
        writeln!(out, "x_star = [{}]", joined(self.x_star.shares()))?;
        writeln!(out, "kind = {}", self.kind)?;
        writeln!(out, "feasible = {}", self.feasible)?;
        writeln!(out, "residual = {}", fmt_sig(self.residual))?;
        let eig = self
            .tangent_eigenvalues
            .iter()
            .map(|e| format!("{}{:+.8e}i", fmt_sig(e.re), e.im))
            .collect::<Vec<_>>()
            .join(", ");
        writeln!(out, "tangent_eigenvalues = [{eig}]")?;
        if let Some(g) = self.reduced_eigen {
            writeln!(out, "reduced_eigen = {}", fmt_sig(g))?;
        }
        if let Some(j) = &self.jacobian_analytic {
            writeln!(
                out,
                "jacobian_analytic = [[{}, {}], [{}, {}]]",
                fmt_sig(j[(0, 0)]),
                fmt_sig(j[(0, 1)]),
                fmt_sig(j[(1, 0)]),
                fmt_sig(j[(1, 1)])
            )?;
        }
        let rows = (0..self.jacobian_numeric.nrows())
            .map(|i| format!("[{}]", joined(&self.jacobian_numeric.row(i).iter().copied().collect::<Vec<_>>())))
            .collect::<Vec<_>>()
            .join(", ");
        writeln!(out, "jacobian_numeric = [{rows}]")?;
        if let Some(l) = &self.lemma1 {
            writeln!(out, "minor_det_j11 = {}", fmt_sig(l.det_j11))?;
            writeln!(out, "minor_det_j = {}", fmt_sig(l.det_j))?;
            writeln!(out, "minor_test_pass = {}", l.pass)?;
        }
        if let Some(t) = &self.theorem2 {
            writeln!(out, "asymptotic_a_minus_b = {}", fmt_sig(t.a_minus_b))?;
            writeln!(out, "asymptotic_b_w1_minus_a_w2 = {}", fmt_sig(t.b_w1_minus_a_w2))?;
            writeln!(out, "asymptotic_cond_a_minus_b_negative = {}", t.a_minus_b_negative)?;
            writeln!(out, "asymptotic_cond_cross_product_positive = {}", t.cross_product_positive)?;
            writeln!(out, "asymptotic_degenerate = {}", t.degenerate)?;
        }
        writeln!(out, "verdict = {}", self.verdict)?;
        writeln!(out, "printed_conditions_disagree = {}", self.printed_conditions_disagree)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{NetworkParams, PoolStrategy};

    fn game(w: [f64; 2], s: [f64; 2]) -> PoolGame {
        PoolGame::new(
            vec![
                PoolStrategy::new(w[0], s[0]).unwrap(),
                PoolStrategy::new(w[1], s[1]).unwrap(),
            ],
            NetworkParams::default(),
        )
        .unwrap()
    }

    fn fig1() -> PoolGame {
        game([30.0, 20.0], [100.0, 100.0])
    }

    #[test]
    fn coefficients_examples() {
        let ab = coefficients_ab(&fig1()).unwrap();
        assert_close!(ab.a, 35970.0124965285, 0.1);
        assert_close!(ab.b, 23980.008331019, 0.1);

        let sym = coefficients_ab(&game([20.0, 20.0], [100.0, 100.0])).unwrap();
        assert_eq!(sym.a, sym.b);

        let mut g = game([30.0, 20.0], [80.0, 80.0]);
        g.params.delay_coeff = 0.0;
        let ab = coefficients_ab(&g).unwrap();
        assert_close!(ab.a / ab.b, 1.5, 1e-15);

        let three = PoolGame::new(vec![PoolStrategy::new(1.0, 1.0).unwrap(); 3], NetworkParams::default()).unwrap();
        assert!(matches!(coefficients_ab(&three), Err(Error::UnsupportedShape { .. })));
    }

    #[test]
    fn rest_points_fig1() {
        let pts = rest_points_two_pool(&fig1()).unwrap();
        assert_eq!(pts.len(), 3);
        assert_close!(pts[2].x1, 0.39800083310190004, 1e-5);
        assert!(pts[2].feasible);
    }

    #[test]
    fn expensive_power_makes_interior_infeasible() {
        let mut g = fig1();
        g.params.power_price = 0.5;
        let pts = rest_points_two_pool(&g).unwrap();
        assert!(pts[2].x1 < 0.0);
        assert!(!pts[2].feasible);
        assert!(pts[2].state().is_none());
    }

    #[test]
    fn equal_hash_rates_are_degenerate_for_the_formula() {
        let g = game([20.0, 20.0], [100.0, 120.0]);
        assert!(matches!(rest_points_two_pool(&g), Err(Error::DegenerateStrategies(_))));
        // the bracket is constant, so only the vertices remain
        let pts = find_rest_points_two_pool(&g).unwrap();
        assert_eq!(pts.len(), 2);
    }

    #[test]
    fn bisection_matches_closed_form() {
        let g = fig1();
        let root = interior_by_bisection(&g, 1e-12).unwrap().unwrap();
        assert_close!(root, interior_closed_form(&g).unwrap(), 1e-11);
    }

    #[test]
    fn vertex_minor_matches_jacobian_entry() {
        let g = fig1();
        let ab = coefficients_ab(&g).unwrap();
        let j = jacobian_two_pool_analytic(&g, &[0.0, 1.0]).unwrap();
        let expected = (ab.a - ab.b) / (5000.0 * 20.0) - 0.01 * 10.0;
        assert_close!(j[(0, 0)], expected, 1e-15);
        let l = lemma1_conditions(&g, LemmaPoint::VertexZero).unwrap();
        assert_close!(l.det_j11, expected, 1e-15);
        assert_close!(l.det_j, j.determinant(), 1e-15);
    }

    #[test]
    fn vertex_minor_sign_test_fails_when_positive() {
        // w1 < w2 and a < b, chosen so that the first minor is positive
        let mut g = game([10.0, 20.0], [100.0, 100.0]);
        g.params.power_price = 0.02;
        let l = lemma1_conditions(&g, LemmaPoint::VertexZero).unwrap();
        assert!(l.det_j11 > 0.0);
        assert!(!l.pass);
    }

    #[test]
    fn symmetric_pools_have_null_tangent_direction() {
        let g = game([20.0, 20.0], [100.0, 100.0]);
        let j = jacobian_two_pool_analytic(&g, &[0.5, 0.5]).unwrap();
        let v = j * nalgebra::Vector2::new(1.0, -1.0);
        assert!(v.norm() < 1e-15, "{v}");
        let jn = jacobian_numeric(&g, &[0.5, 0.5]);
        let t = tangent_eigenvalues(&jn);
        assert!(t[0].norm() < 1e-10);
    }

    #[test]
    fn asymptotic_conditions_fig1() {
        let t = theorem2_asymptotic(&fig1()).unwrap();
        assert_close!(t.a_minus_b, 11990.0041655095, 1.0);
        assert!(!t.a_minus_b_negative);
        assert!(t.b_w1_minus_a_w2.abs() <= 1e-6 * 35970.0 * 20.0);
        assert!(t.degenerate);

        let sym = theorem2_asymptotic(&game([20.0, 20.0], [100.0, 100.0])).unwrap();
        assert_eq!(sym.a_minus_b, 0.0);
        assert_eq!(sym.cross_term, 0.0);
        assert!(sym.degenerate);
    }

    #[test]
    fn classify_fig1() {
        let g = fig1();
        let x = PopulationState::two_pool(interior_closed_form(&g).unwrap()).unwrap();
        let r = classify(&g, &x).unwrap();
        assert_eq!(r.verdict, Verdict::Ess);
        assert_close!(r.reduced_eigen.unwrap(), -9.99e-3, 1e-4);
        assert_close!(r.tangent_eigenvalues[0].re, r.reduced_eigen.unwrap(), 1e-8);
        assert!(r.printed_conditions_disagree);

        for v in 0..2 {
            let r = classify(&g, &PopulationState::vertex(2, v)).unwrap();
            assert_eq!(r.kind, RestPointKind::Vertex);
            assert_eq!(r.verdict, Verdict::NonEss);
            assert!(!r.printed_conditions_disagree);
        }
    }

    #[test]
    fn classify_rejects_non_rest_points() {
        let g = fig1();
        let err = classify(&g, &PopulationState::two_pool(0.75).unwrap());
        assert!(matches!(err, Err(Error::NotRestPoint { .. })));
    }

    #[test]
    fn classify_symmetric_is_degenerate() {
        let g = game([20.0, 20.0], [100.0, 100.0]);
        let r = classify(&g, &PopulationState::two_pool(0.3).unwrap()).unwrap();
        assert_eq!(r.verdict, Verdict::Degenerate);
        assert!(r.lemma1.is_none());
    }

    #[test]
    fn report_outputs() {
        let g = fig1();
        let x = PopulationState::two_pool(interior_closed_form(&g).unwrap()).unwrap();
        let r = classify(&g, &x).unwrap();
        let row = r.csv_row();
        assert_eq!(row.len(), RestPointReport::csv_header(2).len());
        assert_eq!(row[2], "interior");
        assert_eq!(row.last().unwrap(), "ESS");
        let mut buf = Vec::new();
        r.write_key_values(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("printed_conditions_disagree = true"));
        assert!(text.contains("verdict = ESS"));
    }
}
