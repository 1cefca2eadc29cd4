use crate::error::{shape_err, Error, Result};
use crate::qcore::{Algebra, Tensor};

/// Half-width of the regression window.
pub const DELTA_WINDOW: usize = 2;

/// Regression delta `d_t = Σ_{n=1..N} n·(c_{t+n} − c_{t−n}) / (2·Σ n²)` with
/// `N = 2`, replicating the first and last samples past the edges.
pub fn delta(series: &[f64]) -> Result<Vec<f64>> {
    if series.len() < 2 {
        return Err(Error::SeriesTooShort { need: 2, got: series.len() });
    }
    let last = series.len() as isize - 1;
    let at = |i: isize| series[i.clamp(0, last) as usize];
    let norm: f64 = 2.0 * (1..=DELTA_WINDOW).map(|n| (n * n) as f64).sum::<f64>();
    Ok((0..series.len() as isize)
        .map(|t| {
            (1..=DELTA_WINDOW as isize)
                .map(|n| n as f64 * (at(t + n) - at(t - n)))
                .sum::<f64>()
                / norm
        })
        .collect())
}

/// `order`-fold iterated [`delta`]; order 0 returns the series unchanged.
pub fn delta_order(series: &[f64], order: usize) -> Result<Vec<f64>> {
    let mut out = series.to_vec();
    for _ in 0..order {
        out = delta(&out)?;
    }
    if out.len() < 2 {
        return Err(Error::SeriesTooShort { need: 2, got: out.len() });
    }
    Ok(out)
}

/// Filterbank energies `e(f, t)`, `F` rows by `T` frames, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyMatrix {
    channels: usize,
    frames: usize,
    values: Vec<f64>,
    /// Milliseconds between frames.
    pub frame_shift: f64,
}

impl EnergyMatrix {
    pub const MIN_FRAMES: usize = 4;

    pub fn new(channels: usize, frames: usize, values: Vec<f64>, frame_shift: f64) -> Result<Self> {
        if channels == 0 {
            return Err(shape_err("energy matrix needs at least one channel"));
        }
        if frames < Self::MIN_FRAMES {
            return Err(Error::SeriesTooShort { need: Self::MIN_FRAMES, got: frames });
        }
        if values.len() != channels * frames {
            return Err(shape_err(format!(
                "{} values for a {channels}x{frames} energy matrix",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("energy matrix"));
        }
        Ok(Self { channels, frames, values, frame_shift })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn get(&self, f: usize, t: usize) -> f64 {
        self.values[f * self.frames + t]
    }

    pub fn channel(&self, f: usize) -> &[f64] {
        &self.values[f * self.frames..(f + 1) * self.frames]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Quaternion features per frame, stored as `f32` in `(t, f, component)`
/// order, plus an optional per-frame label track.
#[derive(Debug, Clone, PartialEq)]
pub struct QuaternionSequence {
    features: usize,
    frames: usize,
    data: Vec<f32>,
    pub labels: Option<Vec<u32>>,
}

impl QuaternionSequence {
    pub fn new(features: usize, frames: usize, data: Vec<f32>, labels: Option<Vec<u32>>) -> Result<Self> {
        if data.len() != features * frames * 4 {
            return Err(shape_err(format!(
                "{} values for {frames} frames of {features} quaternions",
                data.len()
            )));
        }
        if labels.as_ref().is_some_and(|l| l.len() != frames) {
            return Err(shape_err("label track length differs from frame count"));
        }
        Ok(Self { features, frames, data, labels })
    }

    /// Quaternion units per frame.
    pub fn features(&self) -> usize {
        self.features
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn real_width(&self) -> usize {
        4 * self.features
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Components `(r, i, j, k)` of feature `f` at frame `t`.
    pub fn quaternion(&self, t: usize, f: usize) -> [f32; 4] {
        let o = (t * self.features + f) * 4;
        [self.data[o], self.data[o + 1], self.data[o + 2], self.data[o + 3]]
    }

    /// One `features × 1` quaternion column per frame.
    pub fn to_tensors(&self) -> Vec<Tensor> {
        (0..self.frames)
            .map(|t| {
                let mut x = Tensor::zeros(Algebra::Quaternion, self.features, 1);
                for f in 0..self.features {
                    for (p, v) in self.quaternion(t, f).into_iter().enumerate() {
                        x.set(p, f, 0, f64::from(v));
                    }
                }
                x
            })
            .collect()
    }
}

/// Packs `(e, ∂e/∂t, ∂²e/∂t², ∂³e/∂t³)` into one quaternion per channel and frame.
pub fn assemble_quaternions(energy: &EnergyMatrix) -> Result<QuaternionSequence> {
    let (nf, nt) = (energy.channels(), energy.frames());
    let mut data = vec![0f32; nf * nt * 4];
    for f in 0..nf {
        let e = energy.channel(f);
        let d1 = delta(e)?;
        let d2 = delta(&d1)?;
        let d3 = delta(&d2)?;
        for t in 0..nt {
            let o = (t * nf + f) * 4;
            data[o] = e[t] as f32;
            data[o + 1] = d1[t] as f32;
            data[o + 2] = d2[t] as f32;
            data[o + 3] = d3[t] as f32;
        }
    }
    QuaternionSequence::new(nf, nt, data, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series_has_zero_delta() {
        assert!(delta(&[3.5; 9]).unwrap().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn linear_series_has_unit_delta_inside() {
        let s: Vec<f64> = (0..12).map(f64::from).collect();
        let d = delta(&s).unwrap();
        for &v in &d[2..10] {
            assert!((v - 1.0).abs() < 1e-15);
        }
        // edges see replicated samples, so the slope is underestimated there
        assert!(d[0] < 1.0 && d[11] < 1.0);
        let d2 = delta(&d).unwrap();
        for &v in &d2[4..8] {
            assert!(v.abs() < 1e-15);
        }
    }

    #[test]
    fn shift_invariance() {
        let s = [0.3, -1.2, 4.0, 2.2, 0.0, 1.5, -0.7];
        let shifted: Vec<f64> = s.iter().map(|v| v + 10.0).collect();
        for (a, b) in delta(&s).unwrap().iter().zip(delta(&shifted).unwrap()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn too_short() {
        assert!(matches!(delta(&[1.0]), Err(Error::SeriesTooShort { need: 2, got: 1 })));
        assert!(EnergyMatrix::new(1, 3, vec![0.0; 3], 10.0).is_err());
    }

    #[test]
    fn constant_energy_assembles_to_real_quaternions() {
        let e = EnergyMatrix::new(3, 6, vec![2.5; 18], 10.0).unwrap();
        let q = assemble_quaternions(&e).unwrap();
        for t in 0..6 {
            for f in 0..3 {
                assert_eq!(q.quaternion(t, f), [2.5, 0.0, 0.0, 0.0]);
            }
        }
    }

    #[test]
    fn forty_channels_give_160_reals() {
        let e = EnergyMatrix::new(40, 5, (0..200).map(|v| v as f64).collect(), 10.0).unwrap();
        let q = assemble_quaternions(&e).unwrap();
        assert_eq!(q.features(), 40);
        assert_eq!(q.real_width(), 160);
        assert_eq!(q.to_tensors()[0].real_len(), 160);
    }

    #[test]
    fn ramp_energy() {
        let slope = 0.5;
        let e = EnergyMatrix::new(1, 16, (0..16).map(|t| slope * t as f64).collect(), 10.0).unwrap();
        let q = assemble_quaternions(&e).unwrap();
        for t in 6..10 {
            let [_, i, j, k] = q.quaternion(t, 0);
            assert!((i - 0.5).abs() < 1e-6);
            assert!(j.abs() < 1e-6 && k.abs() < 1e-6);
        }
    }
}
