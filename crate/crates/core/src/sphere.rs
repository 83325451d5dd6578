//! Uniform samples on 𝕊^d, target functions built from kernel sections, and
//! noisy regression datasets.

use std::io::{Read, Write};

use faer::MatRef;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kernels::KernelProfile;
use crate::seed::rng_from_seed;

/// `n` points on 𝕊^d ⊂ ℝ^{d+1}, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereSample {
    d: usize,
    data: Vec<f64>,
    seed: u64,
}

impl SphereSample {
    /// Wraps explicit points. Every row is renormalized to unit length.
    pub fn from_points(d: usize, points: &[Vec<f64>]) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("sphere dimension d must be at least 1"));
        }
        let mut data = Vec::with_capacity(points.len() * (d + 1));
        for (i, p) in points.iter().enumerate() {
            if p.len() != d + 1 {
                return Err(Error::invalid(format!(
                    "point {i} has length {}, expected {}",
                    p.len(),
                    d + 1
                )));
            }
            let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::invalid(format!("point {i} cannot be normalized")));
            }
            data.extend(p.iter().map(|v| v / norm));
        }
        Ok(SphereSample { d, data, seed: 0 })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Length of each point, d + 1.
    pub fn ambient(&self) -> usize {
        self.d + 1
    }

    pub fn len(&self) -> usize {
        self.data.len() / (self.d + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let m = self.d + 1;
        &self.data[i * m..(i + 1) * m]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.d + 1)
    }

    /// The points as an n × (d+1) matrix view.
    pub fn as_mat(&self) -> MatRef<'_, f64> {
        MatRef::from_row_major_slice(&self.data, self.len(), self.d + 1)
    }

    /// Applies `map` to every point (e.g. an orthogonal transform) and
    /// renormalizes.
    pub fn transformed(&self, map: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let pts: Vec<Vec<f64>> = self.points().map(map).collect();
        let mut out = SphereSample::from_points(self.d, &pts)?;
        out.seed = self.seed;
        Ok(out)
    }
}

/// Draws `n` i.i.d. uniform points on 𝕊^d by normalizing standard Gaussian
/// vectors in ℝ^{d+1}.
pub fn sample_sphere(d: usize, n: usize, seed: u64) -> Result<SphereSample> {
    if d == 0 {
        return Err(Error::invalid("sphere dimension d must be at least 1"));
    }
    if n == 0 {
        return Err(Error::invalid("sample size n must be at least 1"));
    }
    let m = d + 1;
    let mut rng = rng_from_seed(seed);
    let mut data = vec![0.0; n * m];
    for row in data.chunks_exact_mut(m) {
        loop {
            for v in row.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            // an exactly-zero draw is resampled rather than divided by
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
                break;
            }
        }
    }
    Ok(SphereSample { d, data, seed })
}

/// f⋆(x) = Σ_i w_i Φ(⟨x, u_i⟩).
#[derive(Debug, Clone, PartialEq)]
pub struct TargetFunction {
    anchors: SphereSample,
    weights: Vec<f64>,
    profile: KernelProfile,
    rkhs_norm_sq: f64,
}

impl TargetFunction {
    pub fn new(profile: KernelProfile, anchors: SphereSample, weights: Vec<f64>) -> Result<Self> {
        if anchors.is_empty() {
            return Err(Error::invalid("target needs at least one anchor"));
        }
        if weights.len() != anchors.len() {
            return Err(Error::invalid(format!(
                "{} weights for {} anchors",
                weights.len(),
                anchors.len()
            )));
        }
        let mut norm = 0.0;
        for (i, ui) in anchors.points().enumerate() {
            for (j, uj) in anchors.points().enumerate() {
                norm += weights[i] * weights[j] * profile.phi_clamped(dot(ui, uj));
            }
        }
        Ok(TargetFunction {
            anchors,
            weights,
            profile,
            rkhs_norm_sq: norm,
        })
    }

    pub fn anchors(&self) -> &SphereSample {
        &self.anchors
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn profile(&self) -> &KernelProfile {
        &self.profile
    }

    pub fn d(&self) -> usize {
        self.anchors.d()
    }

    /// ‖f⋆‖²_H = Σ_{i,j} w_i w_j Φ(⟨u_i, u_j⟩).
    pub fn rkhs_norm_sq(&self) -> f64 {
        self.rkhs_norm_sq
    }

    /// Same anchors with weights divided by ‖f⋆‖_H, so the result lies on
    /// the unit sphere of the RKHS.
    pub fn normalized(&self) -> Self {
        let s = self.rkhs_norm_sq.sqrt();
        TargetFunction {
            anchors: self.anchors.clone(),
            weights: self.weights.iter().map(|w| w / s).collect(),
            profile: self.profile.clone(),
            rkhs_norm_sq: 1.0,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.anchors
            .points()
            .zip(&self.weights)
            .map(|(u, w)| w * self.profile.phi_clamped(dot(x, u)))
            .sum()
    }

    /// Values of f⋆ on every point of `sample`.
    pub fn eval_sample(&self, sample: &SphereSample) -> Result<Vec<f64>> {
        if sample.d() != self.d() {
            return Err(Error::invalid(format!(
                "sample lives on S^{} but the target on S^{}",
                sample.d(),
                self.d()
            )));
        }
        Ok(sample.points().map(|x| self.eval(x)).collect())
    }
}

/// Target with `n_anchors` uniform anchors and unit weights.
pub fn make_target(
    profile: KernelProfile,
    d: usize,
    n_anchors: usize,
    seed: u64,
) -> Result<TargetFunction> {
    let anchors = sample_sphere(d, n_anchors, seed)?;
    TargetFunction::new(profile, anchors, vec![1.0; n_anchors])
}

/// Regression data y_i = f⋆(x_i) + σ z_i.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub sample: SphereSample,
    pub responses: Vec<f64>,
    pub f_star: Vec<f64>,
    pub noise_sd: f64,
    pub target: TargetFunction,
    pub seed: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    /// The recorded noise draws y_i − f⋆(x_i).
    pub fn noise(&self) -> Vec<f64> {
        self.responses
            .iter()
            .zip(&self.f_star)
            .map(|(y, f)| y - f)
            .collect()
    }

    /// CSV with header `x_0,…,x_d,y`; values use shortest round-trip
    /// formatting.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.sample.ambient()).map(|i| format!("x_{i}")).collect();
        header.push("y".into());
        w.write_record(&header).map_err(csv_err)?;
        for (x, y) in self.sample.points().zip(&self.responses) {
            let mut rec: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            rec.push(y.to_string());
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Points and responses read back from [`Dataset::write_csv`] output.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvData {
    pub points: Vec<Vec<f64>>,
    pub responses: Vec<f64>,
}

pub fn read_dataset_csv<R: Read>(reader: R) -> Result<CsvData> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers().map_err(csv_err)?.clone();
    let cols = header.len();
    if cols < 2 || header.get(cols - 1) != Some("y") {
        return Err(Error::Parse("dataset CSV must end with a `y` column".into()));
    }
    let mut points = Vec::new();
    let mut responses = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}"))))
            .collect::<Result<_>>()?;
        responses.push(vals[cols - 1]);
        points.push(vals[..cols - 1].to_vec());
    }
    Ok(CsvData { points, responses })
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

pub fn generate_dataset(
    target: &TargetFunction,
    sample: SphereSample,
    noise_sd: f64,
    seed: u64,
) -> Result<Dataset> {
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::invalid(format!("noise_sd must be >= 0, got {noise_sd}")));
    }
    let f_star = target.eval_sample(&sample)?;
    let mut rng = rng_from_seed(seed);
    let responses = f_star
        .iter()
        .map(|f| {
            let z: f64 = rng.sample(StandardNormal);
            f + noise_sd * z
        })
        .collect();
    Ok(Dataset {
        sample,
        responses,
        f_star,
        noise_sd,
        target: target.clone(),
        seed,
    })
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
