//! From continuous time responses `η(t)` to finite efficiency matrices.
//!
//! A band-limited input is a train of Gaussian pulses spaced `1/(2B)`. The
//! detector acts as multiplication by `η(t)`; compressing that operator onto
//! the pulse span and expressing it in the symmetrically orthonormalized pulse
//! basis gives `E = G^{-1/2} M G^{-1/2}` with `M_jk = ∫ g_j η g_k` and
//! `G_jk = ∫ g_j g_k`. Times are in ns, bandwidths in GHz.

use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::detector::{EfficiencyResponse, EFFICIENCY_TOL};
use crate::error::{Error, Result};
use crate::matrix::{hermitian_eig, ComplexMatrix};

/// Simpson nodes per grid spacing.
pub const NODES_PER_SPACING: usize = 20;
/// Integration extends this many pulse widths past the outer samples.
pub const TAIL_WIDTHS: f64 = 8.0;
/// Largest eigenvalue correction silently clipped into `[0, 1]`.
pub const CLIP_TOL: f64 = 1e-6;

/// Pulse width for bandwidth `B`: `σ = 1/(2πB√2)`.
pub fn pulse_sigma_ns(bandwidth_ghz: f64) -> f64 {
    1.0 / (2.0 * std::f64::consts::PI * bandwidth_ghz * std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteredGate {
    pub bandwidth_ghz: f64,
    pub gate_start_ns: f64,
    pub gate_end_ns: f64,
    pub sample_times_ns: Vec<f64>,
}

impl FilteredGate {
    pub fn d(&self) -> usize {
        self.sample_times_ns.len()
    }

    pub fn spacing_ns(&self) -> f64 {
        0.5 / self.bandwidth_ghz
    }
}

pub fn sample_grid(
    bandwidth_ghz: f64,
    gate_start_ns: f64,
    gate_end_ns: f64,
) -> Result<FilteredGate> {
    if !(bandwidth_ghz > 0.0 && bandwidth_ghz.is_finite()) {
        return Err(Error::InvalidGate(format!(
            "bandwidth {bandwidth_ghz} GHz must be positive"
        )));
    }
    if !(gate_start_ns.is_finite() && gate_end_ns.is_finite() && gate_end_ns > gate_start_ns) {
        return Err(Error::InvalidGate(format!(
            "gate [{gate_start_ns}, {gate_end_ns}] ns is empty"
        )));
    }
    let spacing = 0.5 / bandwidth_ghz;
    let count = ((gate_end_ns - gate_start_ns) / spacing + 1e-9).floor() as usize + 1;
    Ok(FilteredGate {
        bandwidth_ghz,
        gate_start_ns,
        gate_end_ns,
        sample_times_ns: (0..count)
            .map(|k| gate_start_ns + k as f64 * spacing)
            .collect(),
    })
}

/// Tabulated efficiency `η(t)`, linearly interpolated between points and held
/// constant beyond them.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousResponse {
    times_ns: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    time_ns: f64,
    efficiency: f64,
}

impl ContinuousResponse {
    pub fn new(times_ns: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times_ns.is_empty() || times_ns.len() != values.len() {
            return Err(Error::Parse(format!(
                "need matching non-empty columns, got {} times and {} values",
                times_ns.len(),
                values.len()
            )));
        }
        if times_ns.iter().any(|t| !t.is_finite()) || times_ns.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Parse(
                "times must be finite and strictly increasing".into(),
            ));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidEfficiency(format!(
                "tabulated efficiency {v} is not in [0, 1]"
            )));
        }
        Ok(Self { times_ns, values })
    }

    /// Reads a CSV with header `time_ns,efficiency`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = csv
            .headers()
            .map_err(|e| Error::Parse(e.to_string()))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["time_ns", "efficiency"] {
            return Err(Error::Parse(format!(
                "expected header `time_ns,efficiency`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for row in csv.deserialize::<CsvRow>() {
            let row = row.map_err(|e| Error::Parse(e.to_string()))?;
            times.push(row.time_ns);
            values.push(row.efficiency);
        }
        Self::new(times, values)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(file)
    }

    pub fn constant(value: f64, start_ns: f64, end_ns: f64) -> Result<Self> {
        Self::new(vec![start_ns, end_ns], vec![value, value])
    }

    pub fn from_fn(
        start_ns: f64,
        end_ns: f64,
        points: usize,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let step = (end_ns - start_ns) / (points.max(2) - 1) as f64;
        let times: Vec<f64> = (0..points.max(2))
            .map(|k| start_ns + k as f64 * step)
            .collect();
        let values = times.iter().map(|&t| f(t)).collect();
        Self::new(times, values)
    }

    pub fn span_ns(&self) -> (f64, f64) {
        (self.times_ns[0], *self.times_ns.last().expect("non-empty"))
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.times_ns.len();
        if t <= self.times_ns[0] {
            return self.values[0];
        }
        if t >= self.times_ns[n - 1] {
            return self.values[n - 1];
        }
        let k = self.times_ns.partition_point(|&x| x <= t) - 1;
        let (t0, t1) = (self.times_ns[k], self.times_ns[k + 1]);
        let w = (t - t0) / (t1 - t0);
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }

    fn check_covers(&self, gate: &FilteredGate) -> Result<()> {
        let (lo, hi) = self.span_ns();
        let slack = 1e-9 * gate.spacing_ns();
        if lo > gate.gate_start_ns + slack || hi < gate.gate_end_ns - slack {
            return Err(Error::CoverageError(format!(
                "tabulation spans [{lo}, {hi}] ns but the gate is [{}, {}] ns",
                gate.gate_start_ns, gate.gate_end_ns
            )));
        }
        Ok(())
    }
}

/// Simpson weights and nodes over `[a, b]` with `intervals` (even) steps.
fn simpson(a: f64, b: f64, intervals: usize) -> (Vec<f64>, Vec<f64>) {
    let h = (b - a) / intervals as f64;
    let nodes = (0..=intervals).map(|k| a + k as f64 * h).collect();
    let weights = (0..=intervals)
        .map(|k| {
            let c = if k == 0 || k == intervals {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect();
    (nodes, weights)
}

/// Overlap matrices `(G, M)` of the pulse train against `1` and `η`.
pub(crate) fn overlaps(
    resp: &ContinuousResponse,
    gate: &FilteredGate,
    nodes_per_spacing: usize,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let d = gate.d();
    let sigma = pulse_sigma_ns(gate.bandwidth_ghz);
    let first = gate.sample_times_ns[0] - TAIL_WIDTHS * sigma;
    let last = gate.sample_times_ns[d - 1] + TAIL_WIDTHS * sigma;
    let step = gate.spacing_ns() / nodes_per_spacing as f64;
    let mut intervals = ((last - first) / step).ceil() as usize;
    intervals += intervals % 2;
    let (nodes, weights) = simpson(first, last, intervals);

    let mut g = DMatrix::zeros(d, d);
    let mut m = DMatrix::zeros(d, d);
    let mut pulses = vec![0.0; d];
    for (&t, &w) in nodes.iter().zip(&weights) {
        for (j, p) in pulses.iter_mut().enumerate() {
            let x = (t - gate.sample_times_ns[j]) / sigma;
            *p = (-0.5 * x * x).exp();
        }
        let eta = resp.eval(t);
        for j in 0..d {
            for k in j..d {
                let gg = w * pulses[j] * pulses[k];
                g[(j, k)] += gg;
                m[(j, k)] += gg * eta;
            }
        }
    }
    for j in 0..d {
        for k in 0..j {
            g[(j, k)] = g[(k, j)];
            m[(j, k)] = m[(k, j)];
        }
    }
    (g, m)
}

/// `G^{-1/2} M G^{-1/2}`, clipped into `[0, I]` when only marginally outside.
pub(crate) fn compress(g: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<EfficiencyResponse> {
    let to_complex = |a: &DMatrix<f64>| ComplexMatrix::new(a.map(|x| Complex64::new(x, 0.0)));
    let g = to_complex(g)?;
    let m = to_complex(m)?;
    let g_eig = hermitian_eig(&g)?;
    if g_eig.min_eigenvalue() <= 0.0 {
        return Err(Error::NumericalFailure(
            "pulse Gram matrix is singular".into(),
        ));
    }
    let inv_sqrt = g_eig.reconstruct_with(|x| 1.0 / x.sqrt());
    let e = (&(&inv_sqrt * &m) * &inv_sqrt).hermitian_part();
    let eig = hermitian_eig(&e)?;
    let clipped = eig
        .eigenvalues
        .iter()
        .map(|&x| (x - x.clamp(0.0, 1.0)).abs())
        .fold(0.0, f64::max);
    if clipped > CLIP_TOL {
        return Err(Error::NonPhysical { clipped });
    }
    let e = if clipped > EFFICIENCY_TOL {
        eig.reconstruct_with(|x| x.clamp(0.0, 1.0)).hermitian_part()
    } else {
        e
    };
    EfficiencyResponse::new(e)
}

pub fn discretize_response(
    resp: &ContinuousResponse,
    gate: &FilteredGate,
) -> Result<EfficiencyResponse> {
    resp.check_covers(gate)?;
    let (g, m) = overlaps(resp, gate, NODES_PER_SPACING);
    compress(&g, &m)
}

/// `diag(η(t_1), …, η(t_d))`, ignoring correlations between time slots.
pub fn diagonal_only_response(
    resp: &ContinuousResponse,
    gate: &FilteredGate,
) -> Result<EfficiencyResponse> {
    resp.check_covers(gate)?;
    let diag: Vec<f64> = gate.sample_times_ns.iter().map(|&t| resp.eval(t)).collect();
    EfficiencyResponse::new(ComplexMatrix::from_real_diagonal(&diag))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_examples() {
        let g = sample_grid(1.0, 0.0, 2.0).unwrap();
        assert_eq!(g.sample_times_ns, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(g.d(), 5);
        assert_eq!(g.spacing_ns(), 0.5);
        let g = sample_grid(0.5, 0.0, 1.0).unwrap();
        assert_eq!(g.sample_times_ns, vec![0.0, 1.0]);
        assert!(matches!(
            sample_grid(1.0, 2.0, 0.0),
            Err(Error::InvalidGate(_))
        ));
        assert!(matches!(
            sample_grid(1.0, 1.0, 1.0),
            Err(Error::InvalidGate(_))
        ));
        assert!(matches!(
            sample_grid(0.0, 0.0, 1.0),
            Err(Error::InvalidGate(_))
        ));
        let g = sample_grid(1.0, 0.0, 1.2).unwrap();
        assert_eq!(g.sample_times_ns, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn response_validation() {
        assert!(ContinuousResponse::new(vec![0.0, 1.0], vec![0.5, 1.2]).is_err());
        assert!(ContinuousResponse::new(vec![0.0, 0.0], vec![0.5, 0.5]).is_err());
        assert!(ContinuousResponse::new(vec![1.0, 0.0], vec![0.5, 0.5]).is_err());
        assert!(ContinuousResponse::new(vec![], vec![]).is_err());
        let r = ContinuousResponse::new(vec![0.0, 1.0, 3.0], vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(r.eval(0.5), 0.5);
        assert_eq!(r.eval(2.0), 0.5);
        assert_eq!(r.eval(-4.0), 0.0);
        assert_eq!(r.eval(1.0), 1.0);
    }

    #[test]
    fn csv_parsing() {
        let r =
            ContinuousResponse::from_csv_reader("time_ns,efficiency\n0,0.1\n1, 0.3\n".as_bytes())
                .unwrap();
        assert_eq!(r.eval(0.5), 0.2);
        assert!(ContinuousResponse::from_csv_reader("t,eta\n0,0.1\n".as_bytes()).is_err());
        assert!(
            ContinuousResponse::from_csv_reader("time_ns,efficiency\n0,abc\n".as_bytes()).is_err()
        );
        assert!(
            ContinuousResponse::from_csv_reader("time_ns,efficiency\n0,1.5\n".as_bytes()).is_err()
        );
    }

    #[test]
    fn constant_response_is_scaled_identity() {
        let gate = sample_grid(1.0, 0.0, 2.0).unwrap();
        for eta in [0.25, 1.0, 0.0] {
            let resp = ContinuousResponse::constant(eta, 0.0, 2.0).unwrap();
            let e = discretize_response(&resp, &gate).unwrap();
            for j in 0..5 {
                for k in 0..5 {
                    let expected = if j == k { eta } else { 0.0 };
                    assert!((e.matrix().get(j, k) - Complex64::new(expected, 0.0)).norm() < 1e-12);
                }
            }
            assert!(e
                .eigenvalues()
                .iter()
                .all(|&x| x <= eta * (1.0 + 1e-9) + 1e-15));
            let diag = diagonal_only_response(&resp, &gate).unwrap();
            assert_eq!(diag.matrix(), &ComplexMatrix::from_real_diagonal(&[eta; 5]));
        }
    }

    #[test]
    fn coverage_is_checked() {
        let gate = sample_grid(1.0, 0.0, 2.0).unwrap();
        let short = ContinuousResponse::constant(0.5, 0.0, 1.5).unwrap();
        assert!(matches!(
            discretize_response(&short, &gate),
            Err(Error::CoverageError(_))
        ));
        assert!(matches!(
            diagonal_only_response(&short, &gate),
            Err(Error::CoverageError(_))
        ));
    }

    #[test]
    fn bump_peaks_at_its_sample() {
        let gate = sample_grid(1.0, 0.0, 2.0).unwrap();
        let resp = ContinuousResponse::from_fn(-1.0, 3.0, 4001, |t| {
            0.9 * (-(t - 1.0).powi(2) / (2.0 * 0.4f64.powi(2))).exp()
        })
        .unwrap();
        let e = discretize_response(&resp, &gate).unwrap();
        let diag = e.matrix().real_diagonal();
        let peak = (0..5)
            .max_by(|&a, &b| diag[a].partial_cmp(&diag[b]).unwrap())
            .unwrap();
        assert_eq!(peak, 2);
        let off = |k: usize| e.matrix().get(2, 2 + k).norm();
        assert!(off(1) > off(2));
        assert!(off(2) >= 0.0);
    }

    fn trapezoid_reference(
        resp: &ContinuousResponse,
        gate: &FilteredGate,
        oversample: usize,
    ) -> ComplexMatrix {
        let d = gate.d();
        let sigma = pulse_sigma_ns(gate.bandwidth_ghz);
        let first = gate.sample_times_ns[0] - TAIL_WIDTHS * sigma;
        let last = gate.sample_times_ns[d - 1] + TAIL_WIDTHS * sigma;
        let n = ((last - first) / (gate.spacing_ns() / oversample as f64)).ceil() as usize;
        let h = (last - first) / n as f64;
        let mut g = DMatrix::<f64>::zeros(d, d);
        let mut m = DMatrix::<f64>::zeros(d, d);
        for i in 0..=n {
            let t = first + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 * h } else { h };
            for j in 0..d {
                for k in 0..d {
                    let pj = (-0.5 * ((t - gate.sample_times_ns[j]) / sigma).powi(2)).exp();
                    let pk = (-0.5 * ((t - gate.sample_times_ns[k]) / sigma).powi(2)).exp();
                    g[(j, k)] += w * pj * pk;
                    m[(j, k)] += w * pj * pk * resp.eval(t);
                }
            }
        }
        compress(&g, &m).unwrap().matrix().clone()
    }

    #[test]
    fn quadrature_matches_oversampled_oracle() {
        let gate = sample_grid(1.0, 0.0, 2.0).unwrap();
        let resp = ContinuousResponse::from_fn(-1.0, 3.0, 801, |t| {
            0.5 + 0.4 * (3.0 * t).sin() * (-(t - 1.0).powi(2)).exp()
        })
        .unwrap();
        let e = discretize_response(&resp, &gate).unwrap();
        let reference = trapezoid_reference(&resp, &gate, 10 * NODES_PER_SPACING);
        let gap = (e.matrix() - &reference).frobenius_norm();
        // Kinks in the interpolated tabulation limit Simpson to about 1e-6 here.
        assert!(gap < 1e-5, "{gap:e}");
    }

    #[test]
    fn diagonal_converges_as_bandwidth_grows() {
        let eta = |t: f64| 0.5 + 0.3 * (0.8 * t).sin();
        let resp = ContinuousResponse::from_fn(-2.0, 6.0, 8001, eta).unwrap();
        let mut previous = f64::INFINITY;
        for b in [1.0, 2.0, 4.0, 8.0] {
            let gate = sample_grid(b, 0.0, 4.0).unwrap();
            let e = discretize_response(&resp, &gate).unwrap();
            let worst = gate
                .sample_times_ns
                .iter()
                .enumerate()
                .map(|(j, &t)| (e.matrix().get(j, j).re - eta(t)).abs() / eta(t))
                .fold(0.0, f64::max);
            assert!(worst < 0.01, "B = {b}: relative error {worst}");
            assert!(worst <= previous + 1e-12);
            previous = worst;
        }
    }

    #[test]
    fn output_is_always_a_valid_response() {
        let gate = sample_grid(2.0, 0.0, 1.5).unwrap();
        let resp = ContinuousResponse::new(
            vec![-0.5, 0.2, 0.21, 0.7, 0.71, 2.0],
            vec![1.0, 1.0, 0.0, 0.0, 1.0, 1.0],
        )
        .unwrap();
        let e = discretize_response(&resp, &gate).unwrap();
        assert!(e
            .eigenvalues()
            .iter()
            .all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x)));
    }
}
