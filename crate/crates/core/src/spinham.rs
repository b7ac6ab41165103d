//! Triplet spin Hamiltonian of pentacene in an external magnetic field.
//!
//! The Hamiltonian in the Zeeman basis |+1>, |0>, |-1> (quantized along the
//! molecular long axis z) is
//!
//! ```text
//! H = D Sz^2 + E (Sx^2 - Sy^2)
//!   + gamma_e B0 (sin(theta) cos(phi) Sx + sin(theta) sin(phi) Sy + cos(theta) Sz)
//! ```
//!
//! with the molecular frame fixed as: x out of plane, y short in-plane axis,
//! z long in-plane axis. Energies are in MHz throughout. The transverse
//! zero-field term E couples |+1> and |-1>, so eigenstates are mixtures of
//! Zeeman states and the levels curve with field.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

/// Zero-field splitting D of pentacene in p-terphenyl (MHz), long axis frame.
pub const D_PENTACENE_MHZ: f64 = -776.55;
/// Transverse zero-field splitting E of pentacene in p-terphenyl (MHz).
pub const E_PENTACENE_MHZ: f64 = -669.75;
/// Free-electron gyromagnetic ratio (MHz/G).
pub const GAMMA_E_MHZ_PER_G: f64 = 2.80;

#[derive(Debug, Error)]
pub enum SpinHamError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParams { name: &'static str, reason: String },
    #[error("input matrix is not Hermitian (max asymmetry {max_asymmetry:.3e} exceeds tolerance)")]
    NonHermitianInput { max_asymmetry: f64 },
}

/// Parameters of the triplet spin Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripletParams {
    /// Zero-field splitting D (MHz).
    pub d_mhz: f64,
    /// Transverse zero-field splitting E (MHz).
    pub e_mhz: f64,
    /// Gyromagnetic ratio (MHz/G).
    pub gamma_e_mhz_per_g: f64,
    /// Magnetic field magnitude (G).
    pub b0_gauss: f64,
    /// Polar angle of the field in the molecular frame (degrees from z).
    pub theta_deg: f64,
    /// Azimuthal angle of the field (degrees from x towards y).
    pub phi_deg: f64,
}

impl Default for TripletParams {
    fn default() -> Self {
        Self {
            d_mhz: D_PENTACENE_MHZ,
            e_mhz: E_PENTACENE_MHZ,
            gamma_e_mhz_per_g: GAMMA_E_MHZ_PER_G,
            b0_gauss: 512.0,
            theta_deg: 8.0,
            phi_deg: 20.0,
        }
    }
}

impl TripletParams {
    pub fn validate(&self) -> Result<(), SpinHamError> {
        let check = |ok: bool, name: &'static str, reason: String| {
            if ok {
                Ok(())
            } else {
                Err(SpinHamError::InvalidParams { name, reason })
            }
        };
        check(
            self.gamma_e_mhz_per_g > 0.0,
            "gamma_e",
            format!("must be > 0, got {}", self.gamma_e_mhz_per_g),
        )?;
        check(
            self.b0_gauss >= 0.0,
            "b0",
            format!("must be >= 0, got {}", self.b0_gauss),
        )?;
        check(
            (0.0..=180.0).contains(&self.theta_deg),
            "theta",
            format!("must be in [0, 180], got {}", self.theta_deg),
        )?;
        check(
            (0.0..360.0).contains(&self.phi_deg),
            "phi",
            format!("must be in [0, 360), got {}", self.phi_deg),
        )?;
        check(
            self.d_mhz.is_finite() && self.e_mhz.is_finite(),
            "d_or_e",
            "must be finite".to_string(),
        )
    }

    /// Same parameters at a different field magnitude.
    pub fn with_field(&self, b0_gauss: f64) -> Self {
        Self { b0_gauss, ..*self }
    }
}

/// Sublevel label by dominant Zeeman character in the high-field sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Plus,
    Zero,
    Minus,
}

/// Transition branch selector: plus is (ms=+1, ms=0), minus is (ms=0, ms=-1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

/// Eigenvalues and eigenvectors of the triplet Hamiltonian, labeled by
/// dominant Zeeman character.
///
/// `levels[0]`, `levels[1]`, `levels[2]` are the ms = +1, 0, -1 energies in
/// MHz; `states[k]` holds the mixing coefficients (alpha, beta, gamma) of the
/// k-th labeled level over |+1>, |0>, |-1>. The phase convention makes the
/// largest-magnitude coefficient of each state real and positive.
#[derive(Debug, Clone)]
pub struct EigenSolution {
    pub levels: [f64; 3],
    pub states: [[Complex64; 3]; 3],
    /// Set when two levels claim the same dominant Zeeman state (near ties);
    /// the assignment is still deterministic.
    pub degenerate_labeling: bool,
}

impl EigenSolution {
    pub fn level(&self, label: Label) -> f64 {
        match label {
            Label::Plus => self.levels[0],
            Label::Zero => self.levels[1],
            Label::Minus => self.levels[2],
        }
    }

    pub fn state(&self, label: Label) -> &[Complex64; 3] {
        match label {
            Label::Plus => &self.states[0],
            Label::Zero => &self.states[1],
            Label::Minus => &self.states[2],
        }
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Spin-1 operators in the Zeeman basis |+1>, |0>, |-1>.
fn spin_operators() -> (Matrix3<Complex64>, Matrix3<Complex64>, Matrix3<Complex64>) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let sx = Matrix3::new(
        c(0.0), c(s), c(0.0),
        c(s), c(0.0), c(s),
        c(0.0), c(s), c(0.0),
    );
    let i = Complex64::new(0.0, 1.0);
    let sy = Matrix3::new(
        c(0.0), -i * s, c(0.0),
        i * s, c(0.0), -i * s,
        c(0.0), i * s, c(0.0),
    );
    let sz = Matrix3::from_diagonal(&Vector3::new(c(1.0), c(0.0), c(-1.0)));
    (sx, sy, sz)
}

/// Build the 3x3 Hermitian Hamiltonian (MHz) in the Zeeman basis.
pub fn build_hamiltonian(p: &TripletParams) -> Result<Matrix3<Complex64>, SpinHamError> {
    p.validate()?;
    let (sx, sy, sz) = spin_operators();
    let theta = p.theta_deg.to_radians();
    let phi = p.phi_deg.to_radians();
    let zeeman = p.gamma_e_mhz_per_g * p.b0_gauss;
    let h = sz * sz * c(p.d_mhz)
        + (sx * sx - sy * sy) * c(p.e_mhz)
        + (sx * c(theta.sin() * phi.cos())
            + sy * c(theta.sin() * phi.sin())
            + sz * c(theta.cos()))
            * c(zeeman);
    Ok(h)
}

fn hermiticity_defect(h: &Matrix3<Complex64>) -> f64 {
    let mut max = 0.0_f64;
    for i in 0..3 {
        for j in 0..3 {
            max = max.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    max
}

/// Diagonalize a 3x3 Hermitian matrix and label the levels by their dominant
/// Zeeman overlap.
pub fn eigensystem(h: &Matrix3<Complex64>) -> Result<EigenSolution, SpinHamError> {
    let scale = h.iter().map(|z| z.norm()).fold(0.0_f64, f64::max).max(1.0);
    let defect = hermiticity_defect(h);
    if defect > 1e-9 * scale {
        return Err(SpinHamError::NonHermitianInput {
            max_asymmetry: defect,
        });
    }

    let eig = h.symmetric_eigen();
    let energies: [f64; 3] = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]];
    let mut vectors = [[Complex64::default(); 3]; 3];
    for (k, vec) in vectors.iter_mut().enumerate() {
        for (row, slot) in vec.iter_mut().enumerate() {
            *slot = eig.eigenvectors[(row, k)];
        }
    }

    // Overlap of eigenvector k with Zeeman basis state b.
    let overlap = |k: usize, b: usize| vectors[k][b].norm_sqr();

    // Assign labels (basis row -> eigencolumn) by maximizing the total
    // overlap over all six permutations; deterministic tie break by
    // permutation order.
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut best = f64::NEG_INFINITY;
    let mut assignment = [0usize; 3];
    for perm in PERMS {
        let total: f64 = (0..3).map(|b| overlap(perm[b], b)).sum();
        if total > best + 1e-12 {
            best = total;
            assignment = perm;
        }
    }

    // Degenerate labeling: some eigenvector has two (near-)equal dominant
    // overlaps, so the dominant-character rule does not single out a label.
    let mut degenerate = false;
    for k in 0..3 {
        let mut o: Vec<f64> = (0..3).map(|b| overlap(k, b)).collect();
        o.sort_by(|a, b| b.partial_cmp(a).unwrap());
        if (o[0] - o[1]).abs() < 1e-9 {
            degenerate = true;
        }
    }

    let mut levels = [0.0; 3];
    let mut states = [[Complex64::default(); 3]; 3];
    for b in 0..3 {
        let k = assignment[b];
        levels[b] = energies[k];
        let mut v = vectors[k];
        // Phase fix: largest-magnitude coefficient real and positive.
        let (mut max_i, mut max_n) = (0, 0.0);
        for (i, z) in v.iter().enumerate() {
            if z.norm() > max_n + 1e-15 {
                max_n = z.norm();
                max_i = i;
            }
        }
        if max_n > 0.0 {
            let phase = v[max_i] / max_n;
            for z in v.iter_mut() {
                *z /= phase;
            }
        }
        states[b] = v;
    }

    Ok(EigenSolution {
        levels,
        states,
        degenerate_labeling: degenerate,
    })
}

/// Transition frequencies (omega_plus, omega_minus) in MHz, both reported as
/// positive magnitudes. omega_plus is |E(+1) - E(0)|, omega_minus |E(0) - E(-1)|.
pub fn transition_frequencies(p: &TripletParams) -> Result<(f64, f64), SpinHamError> {
    let sol = eigensystem(&build_hamiltonian(p)?)?;
    let plus = (sol.level(Label::Plus) - sol.level(Label::Zero)).abs();
    let minus = (sol.level(Label::Zero) - sol.level(Label::Minus)).abs();
    Ok((plus, minus))
}

/// Central finite-difference slope of the chosen transition frequency at the
/// parameter field, in MHz/G. `db_gauss` defaults to 0.1 G when zero or
/// negative values are rejected upstream.
pub fn local_slope(p: &TripletParams, branch: Branch, db_gauss: f64) -> Result<f64, SpinHamError> {
    if db_gauss <= 0.0 {
        return Err(SpinHamError::InvalidParams {
            name: "db",
            reason: format!("finite-difference step must be > 0, got {db_gauss}"),
        });
    }
    let pick = |pair: (f64, f64)| match branch {
        Branch::Plus => pair.0,
        Branch::Minus => pair.1,
    };
    let hi = pick(transition_frequencies(&p.with_field(p.b0_gauss + db_gauss))?);
    let lo = pick(transition_frequencies(&p.with_field(p.b0_gauss - db_gauss))?);
    Ok((hi - lo) / (2.0 * db_gauss))
}

/// Default finite-difference step for [`local_slope`] (G).
pub const DEFAULT_SLOPE_STEP_GAUSS: f64 = 0.1;

/// One row of a field sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    pub b0_gauss: f64,
    pub e_plus_mhz: f64,
    pub e_zero_mhz: f64,
    pub e_minus_mhz: f64,
    pub omega_plus_mhz: f64,
    pub omega_minus_mhz: f64,
}

/// Levels and transition frequencies on a uniform field grid.
///
/// Points are evaluated independently (parallel) with deterministic output
/// ordering.
pub fn field_sweep(
    p: &TripletParams,
    b_start_gauss: f64,
    b_end_gauss: f64,
    n: usize,
) -> Result<Vec<SweepRow>, SpinHamError> {
    if n < 2 {
        return Err(SpinHamError::InvalidParams {
            name: "n",
            reason: format!("sweep needs at least 2 points, got {n}"),
        });
    }
    if b_start_gauss >= b_end_gauss {
        return Err(SpinHamError::InvalidParams {
            name: "b_range",
            reason: format!("need B_start < B_end, got [{b_start_gauss}, {b_end_gauss}]"),
        });
    }
    let step = (b_end_gauss - b_start_gauss) / (n - 1) as f64;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let b = b_start_gauss + step * i as f64;
            let sol = eigensystem(&build_hamiltonian(&p.with_field(b))?)?;
            Ok(SweepRow {
                b0_gauss: b,
                e_plus_mhz: sol.level(Label::Plus),
                e_zero_mhz: sol.level(Label::Zero),
                e_minus_mhz: sol.level(Label::Minus),
                omega_plus_mhz: (sol.level(Label::Plus) - sol.level(Label::Zero)).abs(),
                omega_minus_mhz: (sol.level(Label::Zero) - sol.level(Label::Minus)).abs(),
            })
        })
        .collect()
}
