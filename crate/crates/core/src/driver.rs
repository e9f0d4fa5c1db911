//! Convergence studies and property suites.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bsm::{build_bsm, check_commuting, random_triangle, scaled_sigma_min};
use crate::exact::{curl_power_case, harmonic_curl_case, smooth_square_case, ManufacturedCase};
use crate::global::{Discretization, SolverKind};
use crate::local::{element_pipeline, LocalSpace};
use crate::mesh::{make_lshape_mesh, make_square_mesh, Domain, Mesh};
use crate::postproc::{avg_diagnostics, energy_error, rate_table, ConstantField};
use crate::sparse::Cholesky;
use crate::{Error, Result, ZeroData};

pub const DEFAULT_MU1: f64 = 1.0 / 3.0 - 1e-3;
pub const DEFAULT_EPS: f64 = 1e-3;

/// Exponent `q` of a singular case: a literal, a fraction `a/b`, or
/// `n+eps` (resolved against the configured epsilon).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Value(f64),
    PlusEps(f64),
}

impl Exponent {
    pub fn resolve(self, eps: f64) -> f64 {
        match self {
            Exponent::Value(q) => q,
            Exponent::PlusEps(n) => n + eps,
        }
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse exponent `{s}`"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        if let Some(base) = s.strip_suffix("+eps") {
            return Ok(Exponent::PlusEps(num(base)?));
        }
        if let Some((a, b)) = s.split_once('/') {
            return Ok(Exponent::Value(num(a)? / num(b)?));
        }
        Ok(Exponent::Value(num(s)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CaseSpec {
    Smooth,
    Harmonic(Exponent),
    CurlPow(Exponent),
}

impl FromStr for CaseSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "smooth" => Ok(CaseSpec::Smooth),
            Some(("harmonic", q)) => Ok(CaseSpec::Harmonic(q.parse()?)),
            Some(("curlpow", q)) => Ok(CaseSpec::CurlPow(q.parse()?)),
            _ => Err(Error::Config(format!("unknown case `{s}` (smooth | harmonic:q | curlpow:q)"))),
        }
    }
}

impl CaseSpec {
    pub fn build(self, alpha: f64, eps: f64) -> ManufacturedCase {
        match self {
            CaseSpec::Smooth => smooth_square_case(alpha),
            CaseSpec::Harmonic(q) => harmonic_curl_case(q.resolve(eps), alpha),
            CaseSpec::CurlPow(q) => curl_power_case(q.resolve(eps), alpha),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub domain: Domain,
    pub case: CaseSpec,
    pub ks: Vec<usize>,
    pub ns: Vec<usize>,
    pub alpha: f64,
    pub mu1: f64,
    pub eps: f64,
    pub solver: SolverKind,
    pub tol: f64,
    pub quad_degree: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            domain: Domain::Square,
            case: CaseSpec::Smooth,
            ks: vec![1, 2, 3],
            ns: vec![4, 8, 16, 32],
            alpha: 1.0,
            mu1: DEFAULT_MU1,
            eps: DEFAULT_EPS,
            solver: SolverKind::Direct,
            tol: 1e-12,
            quad_degree: None,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ns.is_empty() || self.ks.is_empty() {
            return Err(Error::Config("empty k or N list".into()));
        }
        if self.ns[0] == 0 || self.ns.windows(2).any(|w| w[1] != 2 * w[0]) {
            return Err(Error::NonDoubling(self.ns.clone()));
        }
        if let Some(k) = self.ks.iter().find(|k| !(1..=3).contains(*k)) {
            return Err(Error::Config(format!("k must be 1, 2 or 3, got {k}")));
        }
        let expected = match self.case {
            CaseSpec::Smooth => Domain::Square,
            _ => Domain::LShape,
        };
        if self.domain != expected {
            return Err(Error::Config(format!("case {:?} requires the {expected:?} domain", self.case)));
        }
        if self.alpha < 0.0 {
            return Err(Error::Config("alpha must be nonnegative".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        Ok(())
    }

    pub fn mesh(&self, n: usize) -> Result<Mesh> {
        build_mesh(self.domain, n, self.mu1)
    }
}

pub fn build_mesh(domain: Domain, n: usize, mu1: f64) -> Result<Mesh> {
    match domain {
        Domain::Square => make_square_mesh(n),
        Domain::LShape => make_lshape_mesh(n, mu1),
    }
}

/// Errors for each `k` (outer) and `N` (inner).
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub ns: Vec<usize>,
    pub ks: Vec<usize>,
    pub energy: Vec<Vec<f64>>,
    pub l2: Vec<Vec<f64>>,
    /// Largest single-valuedness defect relative to the field scale.
    pub avg_defect: Vec<Vec<f64>>,
}

impl ConvergenceTable {
    pub fn energy_rates(&self, ki: usize) -> Vec<Option<f64>> {
        rate_table(&self.ns, &self.energy[ki]).expect("validated N list")
    }

    pub fn l2_rates(&self, ki: usize) -> Vec<Option<f64>> {
        rate_table(&self.ns, &self.l2[ki]).expect("validated N list")
    }

    /// Rates between the last two rows `(energy, l2)` for each `k`.
    pub fn final_rates(&self) -> Vec<(f64, f64)> {
        (0..self.ks.len())
            .map(|ki| {
                let e = self.energy_rates(ki).last().copied().flatten().unwrap_or(f64::NAN);
                let l = self.l2_rates(ki).last().copied().flatten().unwrap_or(f64::NAN);
                (e, l)
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("N");
        for k in &self.ks {
            let _ = write!(s, ",k={k}_energy_error,k={k}_energy_rate,k={k}_l2_error,k={k}_l2_rate");
        }
        s.push('\n');
        let rates: Vec<_> = (0..self.ks.len()).map(|ki| (self.energy_rates(ki), self.l2_rates(ki))).collect();
        let fmt_rate = |r: Option<f64>| r.map(|v| format!("{v:.4}")).unwrap_or_default();
        for (i, n) in self.ns.iter().enumerate() {
            let _ = write!(s, "{n}");
            for ki in 0..self.ks.len() {
                let _ = write!(
                    s,
                    ",{:.6e},{},{:.6e},{}",
                    self.energy[ki][i],
                    fmt_rate(rates[ki].0[i]),
                    self.l2[ki][i],
                    fmt_rate(rates[ki].1[i])
                );
            }
            s.push('\n');
        }
        s
    }
}

/// Solves every `(k, N)` pair and tabulates energy and L2 errors. Writes
/// the CSV to `config.out` when set.
pub fn run_convergence(config: &RunConfig) -> Result<ConvergenceTable> {
    config.validate()?;
    let case = config.case.build(config.alpha, config.eps);
    let mut table = ConvergenceTable { ns: config.ns.clone(), ks: config.ks.clone(), energy: vec![], l2: vec![], avg_defect: vec![] };
    for &k in &config.ks {
        let (mut e, mut l, mut d) = (Vec::new(), Vec::new(), Vec::new());
        for &n in &config.ns {
            let disc = Discretization::new(config.mesh(n)?, k, config.alpha, config.quad_degree);
            let (sol, report) = disc.solve(&case, config.solver, config.tol)?;
            let err = energy_error(&disc, &sol, &case);
            let avg = avg_diagnostics(&disc, &sol).relative();
            log::info!(
                "{} k={k} N={n}: {} unknowns, residual {:.1e}, energy {:.4e}, L2 {:.4e}, defect {:.1e}",
                case.label(),
                disc.dofs.n_free,
                report.relative_residual,
                err.energy(),
                err.l2(),
                avg
            );
            e.push(err.energy());
            l.push(err.l2());
            d.push(avg);
        }
        table.energy.push(e);
        table.l2.push(l);
        table.avg_defect.push(d);
    }
    if let Some(path) = &config.out {
        std::fs::write(path, table.to_csv())?;
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PropertyReport {
    pub results: Vec<PropertyResult>,
}

impl PropertyReport {
    fn record(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.results.push(PropertyResult { name: name.into(), passed, detail: detail.into() });
    }

    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for r in &self.results {
            let _ = writeln!(s, "[{}] {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
        }
        s
    }
}

/// Runs the structural checks: local solver sanity, SPD of the condensed
/// matrix, equivalence with the monolithic system, single-valuedness of
/// the solution, and the BSM oracle. Meshes are small (`N <= 4`).
pub fn run_properties(config: &RunConfig) -> Result<PropertyReport> {
    let mut rep = PropertyReport::default();
    let mu1 = config.mu1;
    let small = |domain: Domain, n: usize| build_mesh(domain, n, mu1);

    // constant reproduction in a single local solve
    for k in 1..=3 {
        let mesh = small(Domain::Square, 2)?;
        let space = LocalSpace::new(k, config.quad_degree);
        let pen = crate::penalty::PenaltyField::new(&mesh);
        let resp = element_pipeline(&space, &mesh, 0, 1.0, &pen, &ZeroData)?;
        rep.record(format!("local solve zero data k={k}"), resp.u_load.amax() == 0.0, "zero response");
    }

    // SPD of the condensed matrix
    for domain in [Domain::Square, Domain::LShape] {
        for alpha in [config.alpha, 0.0] {
            for k in 1..=2 {
                let disc = Discretization::new(small(domain, 2)?, k, alpha, config.quad_degree);
                let resp = disc.local_responses(&ZeroData)?;
                let sys = disc.assemble_condensed(&resp, &disc.boundary_values(&ZeroData));
                let asym = sys.matrix.asymmetry();
                let chol = Cholesky::new(&sys.matrix).is_ok();
                rep.record(
                    format!("SPD {domain:?} alpha={alpha} k={k}"),
                    chol && asym == 0.0,
                    format!("asymmetry {asym:e}, Cholesky {}", if chol { "ok" } else { "failed" }),
                );
            }
        }
    }

    // condensed vs monolithic, and single-valuedness
    let cases = [
        (Domain::Square, smooth_square_case(config.alpha)),
        (Domain::LShape, harmonic_curl_case(2.0 / 3.0, config.alpha)),
        (Domain::LShape, curl_power_case(2.0 + config.eps, config.alpha)),
    ];
    for (domain, case) in cases {
        for k in 1..=2 {
            let disc = Discretization::new(small(domain, 4)?, k, config.alpha, config.quad_degree);
            let (cond, _) = disc.solve(&case, SolverKind::Direct, config.tol)?;
            let mono = disc.solve_monolithic(&case)?;
            let d = cond.relative_difference(&mono);
            let worst = d.iter().cloned().fold(0.0, f64::max);
            rep.record(
                format!("condensed = monolithic {} k={k}", case.label()),
                worst < 1e-8,
                format!("max relative difference {worst:.2e}"),
            );
            let avg = avg_diagnostics(&disc, &cond);
            rep.record(
                format!("single-valuedness {} k={k}", case.label()),
                avg.relative() < 1e-9,
                format!("max defect / scale {:.2e}", avg.relative()),
            );
        }
    }

    // energy norm closed form
    let disc = Discretization::new(small(Domain::Square, 4)?, 1, 1.0, None);
    let r = energy_error(&disc, &crate::postproc::zero_solution(&disc), &ConstantField([1.0, 0.0]));
    let rel = (r.energy_sq() - 8.25).abs() / 8.25;
    rep.record("norm of (1,0) on N=4 square", rel < 1e-10, format!("relative deviation {rel:.1e}"));

    // BSM oracle
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for k in 1..=3 {
        let s = build_bsm(k, [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])?;
        rep.record(format!("BSM dimension k={k}"), s.dim() == k * (k + 5), format!("{}", s.dim()));
        let mut worst_sigma = f64::INFINITY;
        let mut worst_commute = 0.0f64;
        for _ in 0..100 {
            let tri = random_triangle(&mut rng, 0.2);
            let s = build_bsm(k, tri)?;
            worst_sigma = worst_sigma.min(scaled_sigma_min(&s.dofs));
        }
        for _ in 0..5 {
            let s = build_bsm(k, random_triangle(&mut rng, 0.3))?;
            let (p, q) = random_poly_pair(&mut rng, 2 * k);
            let (px, py, qx, qy) = (p.dx(), p.dy(), q.dx(), q.dy());
            let (dv, cv) = check_commuting(
                &s,
                &|x| [p.eval(x[0], x[1]), q.eval(x[0], x[1])],
                &|x| px.eval(x[0], x[1]) + qy.eval(x[0], x[1]),
                &|x| qx.eval(x[0], x[1]) - py.eval(x[0], x[1]),
            );
            worst_commute = worst_commute.max(dv).max(cv);
        }
        rep.record(format!("BSM unisolvence k={k}"), worst_sigma > 1e-8, format!("min scaled sigma {worst_sigma:.2e}"));
        rep.record(
            format!("BSM commuting projection k={k}"),
            worst_commute < 1e-10,
            format!("max defect {worst_commute:.2e}"),
        );
    }
    Ok(rep)
}

/// Two random polynomials of total degree `deg` with coefficients in
/// `[-1, 1]`.
pub fn random_poly_pair(rng: &mut impl rand::Rng, deg: usize) -> (crate::poly::Poly, crate::poly::Poly) {
    let mut mk = || {
        let mut p = crate::poly::Poly::zero(deg);
        for a in 0..=deg {
            for b in 0..=deg - a {
                p.set(a, b, rng.random_range(-1.0..1.0));
            }
        }
        p
    };
    let p = mk();
    let q = mk();
    (p, q)
}
