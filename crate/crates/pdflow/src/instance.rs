//! Seeded problem generators.

use nalgebra::DMatrix;
use pdflow_core::problem::{ConvexFn, LinearMap, PrimalDualPoint, ProblemSpec};
use pdflow_core::{Matrix, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{CliError, CliResult};

pub const GENERATOR: &str = "ChaCha8Rng";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    /// `f = ½xᵀBx`, `g = ½yᵀCy`, square `A`.
    QuadraticMin,
    /// `f = ½xᵀBx`, `g = ι_{b}` with `b` in the range of `A`.
    LinConstr,
    /// `f = λ‖x‖₁`, `g = ½‖y − b‖²`.
    Lasso,
}

impl Experiment {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "quadratic_min" => Some(Self::QuadraticMin),
            "lin_constr" => Some(Self::LinConstr),
            "lasso" => Some(Self::Lasso),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::QuadraticMin => "quadratic_min",
            Self::LinConstr => "lin_constr",
            Self::Lasso => "lasso",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceConfig {
    pub experiment: Experiment,
    /// Primal dimension (columns of `A`).
    pub dim: usize,
    /// Rows of `A`; defaults to `dim`, or 20 for LASSO.
    pub rows: Option<usize>,
    pub seed: u64,
    pub zero_fraction: f64,
    /// Entries of `A` are `N(0, a_scale² / rows)`.
    pub a_scale: f64,
    pub lambda: f64,
    pub noise_variance: f64,
    /// Fraction of nonzeros in the LASSO ground truth.
    pub sparsity: f64,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::QuadraticMin,
            dim: 100,
            rows: None,
            seed: 0,
            zero_fraction: 0.10,
            a_scale: 1.0,
            lambda: 0.005,
            noise_variance: 0.05,
            sparsity: 0.10,
        }
    }
}

impl InstanceConfig {
    pub fn lasso(seed: u64) -> Self {
        Self { experiment: Experiment::Lasso, dim: 40, rows: Some(20), seed, ..Self::default() }
    }

    pub fn rows(&self) -> usize {
        match (self.rows, self.experiment) {
            (Some(r), _) => r,
            (None, Experiment::Lasso) => 20,
            (None, _) => self.dim,
        }
    }

    pub fn check(&self) -> CliResult<()> {
        if self.dim == 0 || self.rows() == 0 {
            return Err(CliError::Config("instance dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.zero_fraction) {
            return Err(CliError::Config("zero_fraction must lie in [0, 1)".into()));
        }
        if !(self.a_scale > 0.0) || !(self.lambda >= 0.0) || !(self.noise_variance >= 0.0) {
            return Err(CliError::Config("a_scale must be positive, lambda and noise nonnegative".into()));
        }
        if !(self.sparsity > 0.0 && self.sparsity <= 1.0) {
            return Err(CliError::Config("sparsity must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// A generated problem with what was used to build it.
#[derive(Clone, Debug)]
pub struct Instance {
    pub config: InstanceConfig,
    pub problem: ProblemSpec,
    pub b_mat: Option<Matrix>,
    pub c_mat: Option<Matrix>,
    pub rhs: Option<Vector>,
    /// Generating point: feasible witness (constrained) or sparse ground truth (LASSO).
    pub witness: Option<Vector>,
    pub metadata: Vec<(String, String)>,
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, std: f64) -> Matrix {
    let mut m = Matrix::zeros(r, c);
    // column-major fill, fixed order
    for j in 0..c {
        for i in 0..r {
            let v: f64 = StandardNormal.sample(rng);
            m[(i, j)] = std * v;
        }
    }
    m
}

fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize, std: f64) -> Vector {
    Vector::from_iterator(n, (0..n).map(|_| { let v: f64 = StandardNormal.sample(rng); std * v }))
}

/// Haar-like orthogonal matrix from the QR factorization of a Gaussian matrix.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, d: usize) -> Matrix {
    let g = gaussian_matrix(rng, d, d, 1.0);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            let mut col = q.column_mut(j);
            col.neg_mut();
        }
    }
    q
}

/// `Uᵀ diag(eigs) U`, symmetrized.
fn spectral(u: &Matrix, eigs: &Vector) -> Matrix {
    let m = u.transpose() * DMatrix::from_diagonal(eigs) * u;
    (&m + m.transpose()) * 0.5
}

/// Number of zero eigenvalues for a fraction of `d`.
pub fn zero_count(fraction: f64, d: usize) -> usize {
    ((fraction * d as f64) - 1e-9).ceil().max(0.0) as usize
}

fn psd_with_kernel(rng: &mut ChaCha8Rng, d: usize, fraction: f64) -> Matrix {
    let u = random_orthogonal(rng, d);
    let zeros = zero_count(fraction, d);
    let eigs = Vector::from_iterator(
        d,
        (0..d).map(|k| if k < zeros { 0.0 } else { 1.0 - rng.random::<f64>() }),
    );
    spectral(&u, &eigs)
}

fn spd(rng: &mut ChaCha8Rng, d: usize) -> Matrix {
    let u = random_orthogonal(rng, d);
    let eigs = Vector::from_iterator(d, (0..d).map(|_| 0.1 + rng.random::<f64>()));
    spectral(&u, &eigs)
}

pub fn gen_instance(cfg: &InstanceConfig) -> CliResult<Instance> {
    cfg.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.dim;
    let m = cfg.rows();
    let mut metadata = vec![
        ("generator".to_string(), GENERATOR.to_string()),
        ("seed".to_string(), cfg.seed.to_string()),
        ("experiment".to_string(), cfg.experiment.name().to_string()),
        ("dim".to_string(), n.to_string()),
        ("rows".to_string(), m.to_string()),
        ("a_entries".to_string(), format!("N(0, {}^2/{m})", cfg.a_scale)),
    ];
    let core = |e: pdflow_core::Error| CliError::Core(e);
    let (problem, b_mat, c_mat, rhs, witness) = match cfg.experiment {
        Experiment::QuadraticMin => {
            let b = psd_with_kernel(&mut rng, n, cfg.zero_fraction);
            let c = spd(&mut rng, m);
            let a = gaussian_matrix(&mut rng, m, n, cfg.a_scale / (m as f64).sqrt());
            metadata.push(("B".into(), format!("U^T D U, {} zero eigenvalues, rest U(0,1]", zero_count(cfg.zero_fraction, n))));
            metadata.push(("C".into(), "U^T D U, eigenvalues U[0.1,1.1]".into()));
            let f = ConvexFn::quadratic(b.clone(), Vector::zeros(n)).map_err(core)?;
            let g = ConvexFn::quadratic(c.clone(), Vector::zeros(m)).map_err(core)?;
            let p = ProblemSpec::new(f, g, LinearMap::new(a).map_err(core)?).map_err(core)?;
            (p, Some(b), Some(c), None, None)
        }
        Experiment::LinConstr => {
            let b = psd_with_kernel(&mut rng, n, cfg.zero_fraction);
            let a = gaussian_matrix(&mut rng, m, n, cfg.a_scale / (m as f64).sqrt());
            let w = gaussian_vector(&mut rng, n, 1.0);
            let rhs = &a * &w;
            metadata.push(("B".into(), format!("U^T D U, {} zero eigenvalues, rest U(0,1]", zero_count(cfg.zero_fraction, n))));
            metadata.push(("b".into(), "A w, w ~ N(0, I)".into()));
            let f = ConvexFn::quadratic(b.clone(), Vector::zeros(n)).map_err(core)?;
            let g = ConvexFn::indicator_point(rhs.clone());
            let p = ProblemSpec::new(f, g, LinearMap::new(a).map_err(core)?).map_err(core)?;
            (p, Some(b), None, Some(rhs), Some(w))
        }
        Experiment::Lasso => {
            let a = gaussian_matrix(&mut rng, m, n, cfg.a_scale / (m as f64).sqrt());
            let support = ((cfg.sparsity * n as f64).round() as usize).clamp(1, n);
            let mut idx: Vec<usize> = (0..n).collect();
            // partial Fisher–Yates for the support
            for k in 0..support {
                let j = rng.random_range(k..n);
                idx.swap(k, j);
            }
            let mut xs = Vector::zeros(n);
            for &i in &idx[..support] {
                let v: f64 = StandardNormal.sample(&mut rng);
                xs[i] = v;
            }
            let noise = Normal::new(0.0, cfg.noise_variance.sqrt()).map_err(|e| CliError::Config(e.to_string()))?;
            let eps = Vector::from_iterator(m, (0..m).map(|_| noise.sample(&mut rng)));
            let rhs = &a * &xs + eps;
            metadata.push(("x_star".into(), format!("{support} nonzeros ~ N(0,1)")));
            metadata.push(("noise".into(), format!("N(0, {})", cfg.noise_variance)));
            metadata.push(("lambda".into(), cfg.lambda.to_string()));
            let f = ConvexFn::l1(cfg.lambda).map_err(core)?;
            let g = ConvexFn::least_squares_shift(rhs.clone());
            let p = ProblemSpec::new(f, g, LinearMap::new(a).map_err(core)?).map_err(core)?;
            (p, None, None, Some(rhs), Some(xs))
        }
    };
    Ok(Instance { config: cfg.clone(), problem, b_mat, c_mat, rhs, witness, metadata })
}

/// Seeded starting point `N(0, I)` drawn from a stream separate from the instance.
pub fn random_start(seed: u64, n: usize, m: usize) -> PrimalDualPoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let x = gaussian_vector(&mut rng, n, 1.0);
    let y = gaussian_vector(&mut rng, m, 1.0);
    PrimalDualPoint::new(x, y)
}

/// Seeded probe anchors `N(0, I)` from a third stream.
pub fn random_anchors(seed: u64, n: usize, m: usize, count: usize) -> Vec<PrimalDualPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    (0..count)
        .map(|_| {
            let x = gaussian_vector(&mut rng, n, 1.0);
            let y = gaussian_vector(&mut rng, m, 1.0);
            PrimalDualPoint::new(x, y)
        })
        .collect()
}

/// Plain-text dump of an instance: metadata comments followed by named matrices.
pub fn dump(inst: &Instance) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    for (k, v) in &inst.metadata {
        let _ = writeln!(s, "# {k}={v}");
    }
    let mut mat = |name: &str, m: &Matrix| {
        let _ = writeln!(s, "{name} {} {}", m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:.16e}", m[(i, j)])).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
    };
    mat("A", inst.problem.a.matrix());
    if let Some(b) = &inst.b_mat {
        mat("B", b);
    }
    if let Some(c) = &inst.c_mat {
        mat("C", c);
    }
    if let Some(r) = &inst.rhs {
        mat("b", &Matrix::from_column_slice(r.len(), 1, r.as_slice()));
    }
    if let Some(w) = &inst.witness {
        mat("witness", &Matrix::from_column_slice(w.len(), 1, w.as_slice()));
    }
    s
}
