//! Master-equation model for up to three emitters sharing a waveguide.
//!
//! Basis states are indexed by bit strings: bit `i` of the index is set when
//! emitter `i` is excited. Everything is integrated in the frame rotating at
//! the drive frequency.
//!
//! Phase convention: with the drive term `eps sigma+ + h.c.` and
//! `eps = -i sqrt(gamma0 / 2) alpha`, the coherence `<sigma->` here equals
//! `-i` times the coherence `s` used in [`crate::input_output`]. The output
//! field is the same in both models.

mod hybrid;
mod ode;

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{DrivePulse, QubitParams};
use crate::trace::ComplexTrace;

pub use hybrid::{hybridized_states, radiative_rate, transition_dipole, CollectiveState, StateLabel};
pub use ode::Tolerances;

/// Largest supported number of emitters.
pub const MAX_QUBITS: usize = 3;

/// One emitter coupled to the waveguide.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Site {
    /// Transition angular frequency (rad/ns).
    pub omega: f64,
    /// Dimensionless waveguide coupling.
    pub g: f64,
    /// Position along the waveguide (m).
    pub x: f64,
    /// Non-radiative decay rate (rad/ns).
    pub gamma_internal: f64,
}

impl Site {
    /// Site with the radiative rate of `qubit` at position `x`.
    pub fn from_qubit(qubit: &QubitParams, x: f64) -> Self {
        Self {
            omega: qubit.omega_q,
            g: (qubit.gamma_wg / (4.0 * PI * qubit.omega_q)).sqrt(),
            x,
            gamma_internal: qubit.gamma_int,
        }
    }

    /// Radiative rate `4 pi g^2 omega`.
    pub fn gamma_radiative(&self) -> f64 {
        4.0 * PI * self.g * self.g * self.omega
    }
}

/// Emitters, their direct coupling and the propagation speed.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiQubitSystem {
    sites: Vec<Site>,
    /// Direct coupling matrix (rad/ns), symmetric with zero diagonal.
    direct: DMatrix<f64>,
    /// Propagation speed (m/ns).
    nu: f64,
}

/// Speed of light in vacuum (m/ns).
pub const SPEED_OF_LIGHT: f64 = 0.299_792_458;

impl MultiQubitSystem {
    pub fn new(sites: Vec<Site>, direct: DMatrix<f64>, nu: f64) -> Result<Self> {
        let s = Self { sites, direct, nu };
        s.validate()?;
        Ok(s)
    }

    /// A lone emitter at the origin.
    pub fn single(qubit: &QubitParams) -> Result<Self> {
        Self::new(vec![Site::from_qubit(qubit, 0.0)], DMatrix::zeros(1, 1), SPEED_OF_LIGHT)
    }

    /// Two identical emitters at the same position with direct coupling `g12`.
    pub fn co_located_pair(qubit: &QubitParams, g12: f64) -> Result<Self> {
        let site = Site::from_qubit(qubit, 0.0);
        let direct = DMatrix::from_row_slice(2, 2, &[0.0, g12, g12, 0.0]);
        Self::new(vec![site, site], direct, SPEED_OF_LIGHT)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.sites.len();
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::Config(format!("between 1 and {MAX_QUBITS} emitters supported, got {n}")));
        }
        if self.direct.shape() != (n, n) {
            return Err(Error::InvalidParameter(format!(
                "direct coupling matrix must be {n}x{n}, got {:?}",
                self.direct.shape()
            )));
        }
        for i in 0..n {
            if self.direct[(i, i)] != 0.0 {
                return Err(Error::InvalidParameter("direct coupling diagonal must be zero".into()));
            }
            for j in 0..n {
                if (self.direct[(i, j)] - self.direct[(j, i)]).abs() > 1e-12 * self.direct[(i, j)].abs().max(1.0) {
                    return Err(Error::InvalidParameter("direct coupling matrix must be symmetric".into()));
                }
            }
        }
        for (i, s) in self.sites.iter().enumerate() {
            if !(s.g >= 0.0 && s.g.is_finite()) {
                return Err(Error::InvalidParameter(format!("emitter {i}: g must be >= 0")));
            }
            if !(s.gamma_internal >= 0.0) {
                return Err(Error::InvalidParameter(format!("emitter {i}: gamma_internal must be >= 0")));
            }
            if !(s.omega > 0.0 && s.omega.is_finite() && s.x.is_finite()) {
                return Err(Error::InvalidParameter(format!("emitter {i}: omega must be > 0")));
            }
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::InvalidParameter("propagation speed must be > 0".into()));
        }
        Ok(())
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn direct(&self) -> &DMatrix<f64> {
        &self.direct
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn n_qubits(&self) -> usize {
        self.sites.len()
    }

    /// Hilbert space dimension `2^N`.
    pub fn dim(&self) -> usize {
        1 << self.sites.len()
    }

    /// Propagation delay from the origin to emitter `i` (ns).
    pub fn delay(&self, i: usize) -> f64 {
        self.sites[i].x / self.nu
    }

    /// Propagation delay between emitters `i` and `j` (ns).
    pub fn delay_between(&self, i: usize, j: usize) -> f64 {
        (self.sites[i].x - self.sites[j].x).abs() / self.nu
    }
}

/// Waveguide-mediated exchange, collective decay and drive amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct Couplings {
    /// Exchange `J_ij` (rad/ns).
    pub exchange: DMatrix<f64>,
    /// Collective decay `gamma_ij` (rad/ns), symmetrized.
    pub gamma: DMatrix<f64>,
    /// Drive amplitude on each emitter (rad/ns).
    pub epsilon: Vec<Complex64>,
}

/// Exchange and decay matrices plus the drive amplitudes for `drive`.
///
/// For emitters of different frequency the raw matrices are not symmetric;
/// the mean of the two orderings is used.
pub fn collective_couplings(system: &MultiQubitSystem, drive: Option<&DrivePulse>) -> Couplings {
    let n = system.n_qubits();
    let s = system.sites();
    let raw = |i: usize, j: usize| {
        let phase = s[i].omega * system.delay_between(i, j);
        let gg = s[i].g * s[j].g * s[i].omega;
        (2.0 * PI * gg * phase.sin(), 4.0 * PI * gg * phase.cos())
    };
    let mut exchange = DMatrix::zeros(n, n);
    let mut gamma = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let (jij, gij) = raw(i, j);
            let (jji, gji) = raw(j, i);
            if i != j {
                exchange[(i, j)] = 0.5 * (jij + jji);
            }
            gamma[(i, j)] = 0.5 * (gij + gji);
        }
        gamma[(i, i)] += s[i].gamma_internal;
    }
    let epsilon = (0..n)
        .map(|i| match drive {
            Some(d) => {
                let amp = (s[i].gamma_radiative() * d.omega / (2.0 * s[i].omega)).sqrt() * d.alpha;
                -Complex64::i() * amp * Complex64::from_polar(1.0, -d.omega * system.delay(i))
            }
            None => Complex64::default(),
        })
        .collect();
    Couplings { exchange, gamma, epsilon }
}

/// Lowering operator of emitter `i` in the `2^n` basis.
pub fn lowering(n: usize, i: usize) -> DMatrix<Complex64> {
    let dim = 1 << n;
    let bit = 1 << i;
    let mut m = DMatrix::zeros(dim, dim);
    for a in 0..dim {
        if a & bit != 0 {
            m[(a ^ bit, a)] = Complex64::new(1.0, 0.0);
        }
    }
    m
}

/// Hamiltonian in the frame rotating at `frame_omega`, with the drive
/// amplitudes scaled by `envelope`.
pub fn build_hamiltonian(
    system: &MultiQubitSystem,
    couplings: &Couplings,
    frame_omega: f64,
    envelope: f64,
) -> DMatrix<Complex64> {
    let n = system.n_qubits();
    let dim = system.dim();
    let lower: Vec<_> = (0..n).map(|i| lowering(n, i)).collect();
    let mut h = DMatrix::<Complex64>::zeros(dim, dim);
    for (i, site) in system.sites().iter().enumerate() {
        let bit = 1 << i;
        for a in 0..dim {
            if a & bit != 0 {
                h[(a, a)] += site.omega - frame_omega;
            }
        }
        let eps = couplings.epsilon[i] * envelope;
        let raise = lower[i].adjoint();
        h += raise * eps + &lower[i] * eps.conj();
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let c = couplings.exchange[(i, j)] + system.direct()[(i, j)];
            if c != 0.0 {
                let hop = &lower[i] * lower[j].adjoint();
                h += (&hop + hop.adjoint()) * Complex64::new(c, 0.0);
            }
        }
    }
    h
}

/// Density matrix in the `2^N` basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(pub DMatrix<Complex64>);

impl DensityMatrix {
    /// All emitters in the ground state.
    pub fn ground(n_qubits: usize) -> Self {
        Self::basis(n_qubits, 0)
    }

    /// Product basis state `index` (bit `i` set means emitter `i` excited).
    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let dim = 1 << n_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        m[(index, index)] = Complex64::new(1.0, 0.0);
        Self(m)
    }

    /// `|psi><psi|` for a normalized copy of `psi`.
    pub fn pure(psi: &DVector<Complex64>) -> Result<Self> {
        let norm = psi.norm();
        if !(norm > 0.0) {
            return Err(Error::InvalidParameter("state vector has zero norm".into()));
        }
        let v = psi / Complex64::new(norm, 0.0);
        Ok(Self(&v * v.adjoint()))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// `max |rho - rho^dagger|`.
    pub fn hermiticity_error(&self) -> f64 {
        let d = &self.0 - self.0.adjoint();
        d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `|tr rho - 1|`.
    pub fn trace_error(&self) -> f64 {
        (self.0.trace() - Complex64::new(1.0, 0.0)).norm()
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0);
        herm.symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if self.0.ncols() != dim || !dim.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("density matrix must be 2^N square, got {dim}")));
        }
        if self.hermiticity_error() > 1e-10 {
            return Err(Error::InvalidParameter("density matrix is not Hermitian".into()));
        }
        if self.trace_error() > 1e-9 {
            return Err(Error::InvalidParameter("density matrix trace differs from 1".into()));
        }
        if self.min_eigenvalue() < -1e-8 {
            return Err(Error::InvalidParameter("density matrix has negative eigenvalues".into()));
        }
        Ok(())
    }

    /// `<sigma-_i> = tr(rho sigma-_i)`.
    pub fn sigma_minus(&self, i: usize) -> Complex64 {
        let bit = 1 << i;
        (0..self.dim()).filter(|a| a & bit != 0).map(|a| self.0[(a, a ^ bit)]).sum()
    }

    /// `<sigma^z_i>`, +1 for excited.
    pub fn sigma_z(&self, i: usize) -> f64 {
        let bit = 1 << i;
        (0..self.dim()).map(|a| if a & bit != 0 { self.0[(a, a)].re } else { -self.0[(a, a)].re }).sum()
    }

    /// Total number of excitations.
    pub fn excitation(&self) -> f64 {
        (0..self.dim()).map(|a| a.count_ones() as f64 * self.0[(a, a)].re).sum()
    }
}

/// Starting state of an integration.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum InitialState {
    #[default]
    Ground,
    /// Product basis state; bit `i` set means emitter `i` excited.
    Basis(usize),
    Pure(DVector<Complex64>),
    Mixed(DensityMatrix),
}

impl InitialState {
    fn density(&self, n_qubits: usize) -> Result<DensityMatrix> {
        let dim = 1 << n_qubits;
        let rho = match self {
            InitialState::Ground => DensityMatrix::ground(n_qubits),
            InitialState::Basis(k) => {
                if *k >= dim {
                    return Err(Error::InvalidParameter(format!("basis index {k} out of range")));
                }
                DensityMatrix::basis(n_qubits, *k)
            }
            InitialState::Pure(psi) => {
                if psi.len() != dim {
                    return Err(Error::InvalidParameter(format!("state vector must have length {dim}")));
                }
                DensityMatrix::pure(psi)?
            }
            InitialState::Mixed(rho) => {
                if rho.dim() != dim {
                    return Err(Error::InvalidParameter(format!("density matrix must be {dim}x{dim}")));
                }
                rho.clone()
            }
        };
        rho.validate()?;
        Ok(rho)
    }
}

/// Output grid, starting state and integrator settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub t0: f64,
    pub dt: f64,
    pub len: usize,
    pub initial: InitialState,
    pub tolerances: Tolerances,
    /// Frame frequency used when there is no drive (rad/ns). Defaults to the
    /// first emitter's frequency.
    pub frame_omega: Option<f64>,
    /// Keep the full density matrix at every recorded time.
    pub keep_states: bool,
}

impl RunConfig {
    pub fn new(t0: f64, dt: f64, len: usize) -> Self {
        Self {
            t0,
            dt,
            len,
            initial: InitialState::Ground,
            tolerances: Tolerances::default(),
            frame_omega: None,
            keep_states: false,
        }
    }

    pub fn with_initial(mut self, initial: InitialState) -> Self {
        self.initial = initial;
        self
    }
}

/// Expectation values on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub dt: f64,
    /// Frequency of the rotating frame (rad/ns).
    pub frame_omega: f64,
    /// `<sigma-_i>` per emitter, per time.
    pub sigma_minus: Vec<Vec<Complex64>>,
    /// `<sigma^z_i>` per emitter, per time.
    pub sigma_z: Vec<Vec<f64>>,
    /// Total excitation per time.
    pub excitation: Vec<f64>,
    /// Largest `|tr rho - 1|` over the recorded times.
    pub max_trace_error: f64,
    /// Largest `max |rho - rho^dagger|` over the recorded times.
    pub max_hermiticity_error: f64,
    pub states: Option<Vec<DensityMatrix>>,
    pub final_state: DensityMatrix,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.excitation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.excitation.is_empty()
    }

    pub fn time(&self, n: usize) -> f64 {
        self.t0 + n as f64 * self.dt
    }

    pub fn n_qubits(&self) -> usize {
        self.sigma_minus.len()
    }

    /// Writes `t_ns,re_s1,im_s1,z1,...` CSV, one column triple per emitter.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t_ns".to_string()];
        for q in 1..=self.n_qubits() {
            header.extend([format!("re_s{q}"), format!("im_s{q}"), format!("z{q}")]);
        }
        wr.write_record(&header)?;
        for n in 0..self.len() {
            let mut row = vec![self.time(n).to_string()];
            for q in 0..self.n_qubits() {
                let s = self.sigma_minus[q][n];
                row.extend([s.re.to_string(), s.im.to_string(), self.sigma_z[q][n].to_string()]);
            }
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Precomputed generator `d rho = -i (H rho - rho H^dagger) + sum_k w_k L_k rho L_k^dagger`
/// with the non-Hermitian `H = H_0 + env(t) H_d - (i/2) sum gamma_ij s+_i s-_j`.
struct Generator {
    dim: usize,
    h0: Vec<Complex64>,
    hd: Vec<Complex64>,
    jumps: Vec<(f64, Vec<Complex64>)>,
    work: Vec<Complex64>,
}

fn to_row_major(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    let (r, c) = m.shape();
    (0..r).flat_map(|i| (0..c).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect()
}

impl Generator {
    fn new(system: &MultiQubitSystem, couplings: &Couplings, frame_omega: f64) -> Self {
        let n = system.n_qubits();
        let dim = system.dim();
        let lower: Vec<_> = (0..n).map(|i| lowering(n, i)).collect();
        let h_static = build_hamiltonian(system, couplings, frame_omega, 0.0);
        let h_full = build_hamiltonian(system, couplings, frame_omega, 1.0);
        let mut anti = DMatrix::<Complex64>::zeros(dim, dim);
        for i in 0..n {
            for j in 0..n {
                let g = couplings.gamma[(i, j)];
                if g != 0.0 {
                    anti += lower[i].adjoint() * &lower[j] * Complex64::new(g, 0.0);
                }
            }
        }
        let hd = h_full - &h_static;
        let h0 = h_static - anti * Complex64::new(0.0, 0.5);
        let eig = couplings.gamma.clone().symmetric_eigen();
        let mut jumps = Vec::new();
        for k in 0..n {
            let w = eig.eigenvalues[k];
            if w.abs() < 1e-300 {
                continue;
            }
            let mut l = DMatrix::<Complex64>::zeros(dim, dim);
            for j in 0..n {
                l += &lower[j] * Complex64::new(eig.eigenvectors[(j, k)], 0.0);
            }
            jumps.push((w, to_row_major(&l)));
        }
        Self { dim, h0: to_row_major(&h0), hd: to_row_major(&hd), jumps, work: vec![Complex64::default(); dim * dim] }
    }

    fn rhs(&mut self, envelope: f64, rho: &[Complex64], out: &mut [Complex64]) {
        let d = self.dim;
        let i = Complex64::i();
        // -i (H rho - rho H^dagger)
        for r in 0..d {
            for c in 0..d {
                let mut acc = Complex64::default();
                for k in 0..d {
                    let h_rk = self.h0[r * d + k] + envelope * self.hd[r * d + k];
                    let h_ck = self.h0[c * d + k] + envelope * self.hd[c * d + k];
                    acc += h_rk * rho[k * d + c] - rho[r * d + k] * h_ck.conj();
                }
                out[r * d + c] = -i * acc;
            }
        }
        for (w, l) in &self.jumps {
            // work = L rho
            for r in 0..d {
                for c in 0..d {
                    let mut acc = Complex64::default();
                    for k in 0..d {
                        let lv = l[r * d + k];
                        if lv != Complex64::default() {
                            acc += lv * rho[k * d + c];
                        }
                    }
                    self.work[r * d + c] = acc;
                }
            }
            // out += w work L^dagger
            for r in 0..d {
                for c in 0..d {
                    let mut acc = Complex64::default();
                    for k in 0..d {
                        let lv = l[c * d + k];
                        if lv != Complex64::default() {
                            acc += self.work[r * d + k] * lv.conj();
                        }
                    }
                    out[r * d + c] += *w * acc;
                }
            }
        }
    }
}

/// Integrates the master equation and records expectations on
/// `t0 + n dt`, `n < len`. The state at `t0` is `config.initial`.
pub fn integrate_master_equation(
    system: &MultiQubitSystem,
    drive: Option<&DrivePulse>,
    config: &RunConfig,
) -> Result<Trajectory> {
    system.validate()?;
    if let Some(d) = drive {
        d.validate()?;
    }
    if !(config.dt > 0.0 && config.dt.is_finite()) || config.len == 0 {
        return Err(Error::Config("output grid needs dt > 0 and at least one sample".into()));
    }
    let tol = config.tolerances;
    if !(tol.rtol > 0.0 && tol.atol > 0.0 && tol.max_step > 0.0) {
        return Err(Error::Config("integrator tolerances must be > 0".into()));
    }
    let n = system.n_qubits();
    let dim = system.dim();
    let frame_omega = match drive {
        Some(d) => d.omega,
        None => config.frame_omega.unwrap_or(system.sites()[0].omega),
    };
    let couplings = collective_couplings(system, drive);
    let mut generator = Generator::new(system, &couplings, frame_omega);
    let rho0 = config.initial.density(n)?;
    let mut y = to_row_major(&rho0.0);

    let mut traj = Trajectory {
        t0: config.t0,
        dt: config.dt,
        frame_omega,
        sigma_minus: vec![Vec::with_capacity(config.len); n],
        sigma_z: vec![Vec::with_capacity(config.len); n],
        excitation: Vec::with_capacity(config.len),
        max_trace_error: 0.0,
        max_hermiticity_error: 0.0,
        states: config.keep_states.then(Vec::new),
        final_state: rho0.clone(),
    };
    let breakpoints: Vec<f64> = drive.map(|d| d.breakpoints()).unwrap_or_default();
    let mut stepper = ode::DormandPrince::new(tol, dim * dim);

    let mut t = config.t0;
    for k in 0..config.len {
        let t_rec = config.t0 + k as f64 * config.dt;
        let mut cuts: Vec<f64> = breakpoints.iter().copied().filter(|&b| b > t && b < t_rec).collect();
        cuts.push(t_rec);
        for b in cuts {
            if b - t > 1e-12 * b.abs().max(1.0) {
                let (a, end) = (t, b);
                // evaluate the envelope strictly inside the segment so that
                // jumps at the ends are never sampled
                let inner = 1e-9 * (end - a);
                let mut f = |s: f64, rho: &[Complex64], out: &mut [Complex64]| {
                    let env = drive.map_or(0.0, |d| d.envelope(s.clamp(a + inner, end - inner)));
                    generator.rhs(env, rho, out);
                };
                stepper.advance(&mut f, a, end, &mut y)?;
            }
            t = b;
        }
        let rho = DensityMatrix(DMatrix::from_row_slice(dim, dim, &y));
        let min_eig = rho.min_eigenvalue();
        if min_eig < -1e-6 {
            return Err(Error::Integrator(format!(
                "density matrix lost positivity at t = {t_rec} (eigenvalue {min_eig:e})"
            )));
        }
        traj.max_trace_error = traj.max_trace_error.max(rho.trace_error());
        traj.max_hermiticity_error = traj.max_hermiticity_error.max(rho.hermiticity_error());
        for q in 0..n {
            traj.sigma_minus[q].push(rho.sigma_minus(q));
            traj.sigma_z[q].push(rho.sigma_z(q));
        }
        traj.excitation.push(rho.excitation());
        if let Some(states) = traj.states.as_mut() {
            states.push(rho.clone());
        }
        traj.final_state = rho;
    }
    log::debug!("master equation: {} accepted, {} rejected steps", stepper.accepted, stepper.rejected);
    Ok(traj)
}

/// Output field `<a_in> + sum_i e^{i omega_i t_i} sqrt(gamma0_ii / 2) <sigma-_i>`
/// in the trajectory's rotating frame.
pub fn output_field(traj: &Trajectory, system: &MultiQubitSystem, drive: Option<&DrivePulse>) -> Result<ComplexTrace> {
    if traj.n_qubits() != system.n_qubits() {
        return Err(Error::InvalidParameter("trajectory and system disagree on emitter count".into()));
    }
    let weights: Vec<Complex64> = system
        .sites()
        .iter()
        .enumerate()
        .map(|(i, s)| Complex64::from_polar((s.gamma_radiative() / 2.0).sqrt(), s.omega * system.delay(i)))
        .collect();
    let samples = (0..traj.len())
        .map(|k| {
            let t = traj.time(k);
            let a_in = drive.map_or(0.0, |d| d.alpha * d.envelope(t));
            let emitted: Complex64 = weights.iter().zip(&traj.sigma_minus).map(|(w, s)| w * s[k]).sum();
            a_in + emitted
        })
        .collect();
    ComplexTrace::new(traj.t0, traj.dt, samples)
}

/// `(2 Re <sigma->, 2 Im <sigma->, <sigma^z>)` of emitter `qubit`.
pub fn bloch_trajectory(traj: &Trajectory, qubit: usize) -> Result<Vec<[f64; 3]>> {
    if qubit >= traj.n_qubits() {
        return Err(Error::InvalidParameter(format!("no emitter {qubit}")));
    }
    Ok(traj.sigma_minus[qubit].iter().zip(&traj.sigma_z[qubit]).map(|(s, z)| [2.0 * s.re, 2.0 * s.im, *z]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::input_output::{free_decay, steady_state};
    use crate::units::mhz_to_rad_per_ns;

    fn qubit(gamma_mhz: f64, beta: f64) -> QubitParams {
        QubitParams::from_gamma_beta(2.0 * PI * 7.0, mhz_to_rad_per_ns(gamma_mhz), beta).unwrap()
    }

    #[test]
    fn co_located_couplings() {
        let q = qubit(5.0, 1.0);
        let sys = MultiQubitSystem::co_located_pair(&q, 0.0).unwrap();
        let c = collective_couplings(&sys, None);
        assert_eq!(c.exchange[(0, 1)], 0.0);
        let s = sys.sites()[0];
        let expect = 4.0 * PI * s.g * s.g * s.omega;
        assert!((c.gamma[(0, 1)] - expect).abs() < 1e-15);
        assert!((c.gamma[(0, 0)] - q.gamma()).abs() < 1e-12);
    }

    #[test]
    fn quarter_wave_spacing() {
        let q = qubit(5.0, 1.0);
        let s1 = Site::from_qubit(&q, 0.0);
        let x = PI / 2.0 * SPEED_OF_LIGHT / q.omega_q;
        let s2 = Site::from_qubit(&q, x);
        let sys = MultiQubitSystem::new(vec![s1, s2], DMatrix::zeros(2, 2), SPEED_OF_LIGHT).unwrap();
        let c = collective_couplings(&sys, None);
        assert!(c.gamma[(0, 1)].abs() < 1e-12);
        assert!((c.exchange[(0, 1)] - 2.0 * PI * s1.g * s2.g * q.omega_q).abs() < 1e-12);
    }

    #[test]
    fn decoupled_emitter() {
        let q = qubit(5.0, 1.0);
        let mut s2 = Site::from_qubit(&q, 0.01);
        s2.g = 0.0;
        s2.gamma_internal = 0.003;
        let sys =
            MultiQubitSystem::new(vec![Site::from_qubit(&q, 0.0), s2], DMatrix::zeros(2, 2), SPEED_OF_LIGHT).unwrap();
        let c = collective_couplings(&sys, None);
        assert_eq!(c.gamma[(0, 1)], 0.0);
        assert_eq!(c.gamma[(1, 0)], 0.0);
        assert_eq!(c.exchange[(1, 0)], 0.0);
        assert_eq!(c.gamma[(1, 1)], 0.003);
    }

    #[test]
    fn gamma_matrix_rank_one() {
        let q = qubit(5.0, 1.0);
        let sys = MultiQubitSystem::co_located_pair(&q, 0.0).unwrap();
        let c = collective_couplings(&sys, None);
        let mut ev: Vec<f64> = c.gamma.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!(ev[0].abs() < 1e-15);
        assert!((ev[1] - (c.gamma[(0, 0)] + c.gamma[(1, 1)])).abs() < 1e-14);
    }

    #[test]
    fn single_qubit_hamiltonian() {
        let q = qubit(5.0, 0.8);
        let sys = MultiQubitSystem::single(&q).unwrap();
        let alpha = 0.1;
        let drive = DrivePulse::rectangular(alpha, q.omega_q, 0.0, 100.0).unwrap();
        let c = collective_couplings(&sys, Some(&drive));
        let h = build_hamiltonian(&sys, &c, drive.omega, 1.0);
        let eps = -Complex64::i() * (q.gamma_wg / 2.0).sqrt() * alpha;
        assert!(h[(0, 0)].norm() < 1e-15 && h[(1, 1)].norm() < 1e-15);
        assert!((h[(1, 0)] - eps).norm() < 1e-12);
        assert!((h[(0, 1)] - eps.conj()).norm() < 1e-12);
    }

    #[test]
    fn hamiltonian_hermitian_with_positions() {
        let q = qubit(5.0, 0.7);
        let mut sites = vec![Site::from_qubit(&q, 0.0), Site::from_qubit(&q, 0.013), Site::from_qubit(&q, 0.021)];
        sites[1].omega += 0.05;
        let g = DMatrix::from_row_slice(3, 3, &[0.0, 0.01, 0.02, 0.01, 0.0, -0.03, 0.02, -0.03, 0.0]);
        let sys = MultiQubitSystem::new(sites, g, SPEED_OF_LIGHT).unwrap();
        let drive = DrivePulse::rectangular(0.2, q.omega_q + 0.01, 0.0, 10.0).unwrap();
        let c = collective_couplings(&sys, Some(&drive));
        let h = build_hamiltonian(&sys, &c, drive.omega, 0.7);
        let err = (&h - h.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-15);
    }

    #[test]
    fn direct_coupling_splits_single_excitation_block() {
        let q = qubit(5.0, 1.0);
        let g12 = 0.05;
        let sys = MultiQubitSystem::co_located_pair(&q, g12).unwrap();
        let c = collective_couplings(&sys, None);
        let h = build_hamiltonian(&sys, &c, q.omega_q, 1.0);
        let block = DMatrix::from_fn(2, 2, |r, k| h[(r + 1, k + 1)]);
        let eig = block.symmetric_eigen();
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        assert!((ev[1] - ev[0] - 2.0 * g12).abs() < 1e-14);
        for k in 0..2 {
            let v = eig.eigenvectors.column(k);
            assert!((v[0].norm() - 1.0 / 2f64.sqrt()).abs() < 1e-12);
            assert!((v[1].norm() - 1.0 / 2f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_systems() {
        let q = qubit(5.0, 1.0);
        let s = Site::from_qubit(&q, 0.0);
        assert!(matches!(MultiQubitSystem::new(vec![s; 4], DMatrix::zeros(4, 4), 0.3), Err(Error::Config(_))));
        let asym = DMatrix::from_row_slice(2, 2, &[0.0, 0.1, 0.2, 0.0]);
        assert!(MultiQubitSystem::new(vec![s; 2], asym, 0.3).is_err());
        let diag = DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, 0.0]);
        assert!(MultiQubitSystem::new(vec![s; 2], diag, 0.3).is_err());
        assert!(MultiQubitSystem::new(vec![s], DMatrix::zeros(1, 1), 0.0).is_err());
        let mut neg = s;
        neg.g = -0.1;
        assert!(MultiQubitSystem::new(vec![neg], DMatrix::zeros(1, 1), 0.3).is_err());
    }

    #[test]
    fn excited_decay() {
        let q = qubit(5.0, 0.9);
        let sys = MultiQubitSystem::single(&q).unwrap();
        let cfg = RunConfig::new(0.0, 5.0, 41).with_initial(InitialState::Basis(1));
        let traj = integrate_master_equation(&sys, None, &cfg).unwrap();
        for k in 0..traj.len() {
            let t = traj.time(k);
            let expect = 2.0 * (-q.gamma() * t).exp() - 1.0;
            assert!((traj.sigma_z[0][k] - expect).abs() < 1e-8, "t={t}");
        }
        assert!(traj.max_trace_error < 1e-9);
        assert!(traj.max_hermiticity_error < 1e-10);
    }

    #[test]
    fn steady_state_matches_closed_form() {
        let q = qubit(5.0, 0.9);
        let sys = MultiQubitSystem::single(&q).unwrap();
        let alpha = 0.8 * q.gamma().sqrt();
        let drive = DrivePulse::rectangular(alpha, q.omega_q, 0.0, 1000.0).unwrap();
        let cfg = RunConfig::new(0.0, 10.0, 101);
        let traj = integrate_master_equation(&sys, Some(&drive), &cfg).unwrap();
        let ss = steady_state(&q, alpha, 0.0);
        let [xd, yd, zd] = ss.bloch_vector();
        let last = *bloch_trajectory(&traj, 0).unwrap().last().unwrap();
        let dist = ((last[0] - yd).powi(2) + (last[1] + xd).powi(2) + (last[2] - zd).powi(2)).sqrt();
        assert!(dist < 1e-6, "distance {dist}");
        for b in bloch_trajectory(&traj, 0).unwrap() {
            assert!(b[0] * b[0] + b[1] * b[1] + b[2] * b[2] <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn ground_state_is_south_pole() {
        let q = qubit(5.0, 0.9);
        let sys = MultiQubitSystem::single(&q).unwrap();
        let traj = integrate_master_equation(&sys, None, &RunConfig::new(0.0, 1.0, 5)).unwrap();
        for b in bloch_trajectory(&traj, 0).unwrap() {
            assert_eq!(b, [0.0, 0.0, -1.0]);
        }
        assert!(bloch_trajectory(&traj, 1).is_err());
    }

    #[test]
    fn post_pulse_field_matches_free_decay() {
        let q = qubit(5.0, 0.9);
        let sys = MultiQubitSystem::single(&q).unwrap();
        let alpha = 0.5 * q.gamma().sqrt();
        let t_stop = 1000.0;
        let drive = DrivePulse::rectangular(alpha, q.omega_q, 0.0, t_stop).unwrap();
        let cfg = RunConfig::new(t_stop, 2.0, 101);
        let traj = integrate_master_equation(&sys, Some(&drive), &RunConfig::new(0.0, t_stop, 2)).unwrap();
        let cfg = RunConfig { initial: InitialState::Mixed(traj.final_state.clone()), ..cfg };
        let after = integrate_master_equation(&sys, Some(&drive), &cfg).unwrap();
        let field = output_field(&after, &sys, Some(&drive)).unwrap();
        let ss = steady_state(&q, alpha, 0.0);
        let expect = free_decay(&q, &ss, drive.omega, 0.0, 2.0, 101).unwrap();
        for (a, b) in field.samples().iter().zip(expect.samples()).skip(1) {
            assert!((a - b).norm() < 1e-6);
        }
    }

    #[test]
    fn transparent_without_excitation() {
        let q = qubit(5.0, 0.9);
        let mut sys = MultiQubitSystem::single(&q).unwrap();
        sys.sites[0].g = 0.0;
        let drive = DrivePulse::rectangular(0.3, q.omega_q, 10.0, 50.0).unwrap();
        let traj = integrate_master_equation(&sys, Some(&drive), &RunConfig::new(0.0, 1.0, 80)).unwrap();
        let out = output_field(&traj, &sys, Some(&drive)).unwrap();
        for (k, a) in out.samples().iter().enumerate() {
            let t = out.time(k);
            assert!((a - drive.alpha * drive.envelope(t)).norm() < 1e-15);
        }
    }

    fn pair_state(sign: f64) -> InitialState {
        let h = 1.0 / 2f64.sqrt();
        let c = |x: f64| Complex64::new(x, 0.0);
        InitialState::Pure(DVector::from_vec(vec![c(0.0), c(h), c(sign * h), c(0.0)]))
    }

    #[test]
    fn bright_state_decays_twice_as_fast() {
        let q = qubit(5.0, 1.0);
        let sys = MultiQubitSystem::co_located_pair(&q, 0.0).unwrap();
        let cfg = RunConfig::new(0.0, 2.0, 51).with_initial(pair_state(1.0));
        let traj = integrate_master_equation(&sys, None, &cfg).unwrap();
        let n = traj.len();
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for k in 0..n {
            let (x, y) = (traj.time(k), traj.excitation[k].ln());
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        let slope = (n as f64 * sxy - sx * sy) / (n as f64 * sxx - sx * sx);
        assert!((-slope / (2.0 * q.gamma()) - 1.0).abs() < 0.01);
    }

    #[test]
    fn dark_state_does_not_radiate() {
        let q = qubit(5.0, 1.0);
        let sys = MultiQubitSystem::co_located_pair(&q, 0.0).unwrap();
        let cfg = RunConfig::new(0.0, 5.0, 41).with_initial(pair_state(-1.0));
        let traj = integrate_master_equation(&sys, None, &cfg).unwrap();
        let out = output_field(&traj, &sys, None).unwrap();
        assert!(out.max_abs() < 1e-10);
        assert!((traj.excitation.last().unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn keeps_states_when_asked() {
        let q = qubit(5.0, 1.0);
        let sys = MultiQubitSystem::single(&q).unwrap();
        let mut cfg = RunConfig::new(0.0, 1.0, 3).with_initial(InitialState::Basis(1));
        cfg.keep_states = true;
        let traj = integrate_master_equation(&sys, None, &cfg).unwrap();
        let states = traj.states.as_ref().unwrap();
        assert_eq!(states.len(), 3);
        assert!(states.iter().all(|r| r.validate().is_ok()));
    }

    #[test]
    fn rejects_bad_initial_state() {
        let q = qubit(5.0, 1.0);
        let sys = MultiQubitSystem::single(&q).unwrap();
        let cfg = RunConfig::new(0.0, 1.0, 3).with_initial(InitialState::Basis(2));
        assert!(integrate_master_equation(&sys, None, &cfg).is_err());
        let bad = DensityMatrix(DMatrix::from_diagonal(&DVector::from_vec(vec![
            Complex64::new(1.5, 0.0),
            Complex64::new(-0.5, 0.0),
        ])));
        let cfg = RunConfig::new(0.0, 1.0, 3).with_initial(InitialState::Mixed(bad));
        assert!(integrate_master_equation(&sys, None, &cfg).is_err());
    }

    #[test]
    fn trajectory_csv_header() {
        let q = qubit(5.0, 1.0);
        let sys = MultiQubitSystem::co_located_pair(&q, 0.0).unwrap();
        let traj = integrate_master_equation(&sys, None, &RunConfig::new(0.0, 1.0, 2)).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t_ns,re_s1,im_s1,z1,re_s2,im_s2,z2\n"));
        assert_eq!(text.lines().count(), 3);
    }
}
