//! Spectral analysis of trajectories: radial amplitude profiles, cumulative
//! energy curves and time-averaged normalized maps, with CSV export.

use std::fmt::Write as _;
use std::path::Path;

use crate::container::write_atomic;
use crate::cutoff::cumulative_magnitude;
use crate::error::{Error, Result};
use crate::spectral::{ceil_sqrt, floor_sqrt, max_squared_radius, squared_radii, SpectralField};
use crate::tensor::LatentTensor;

/// Radially averaged `|U|`, bucketed by `floor(radius)` over all channels.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    pub step: usize,
    /// Mean `|U|` per bucket; `None` for buckets with no bins.
    pub mean_amplitude: Vec<Option<f64>>,
    /// `ln(mean |U| at r) - ln(mean |U| at 0)`; `None` where the bucket is
    /// empty or has zero amplitude.
    pub relative_log: Vec<Option<f64>>,
}

impl RadialProfile {
    pub fn at_step(mut self, step: usize) -> Self {
        self.step = step;
        self
    }

    pub fn len(&self) -> usize {
        self.mean_amplitude.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean_amplitude.is_empty()
    }
}

pub fn radial_profile(spectrum: &SpectralField) -> Result<RadialProfile> {
    let s = spectrum.shape();
    let buckets = ceil_sqrt(max_squared_radius(s.height, s.width)) as usize + 1;
    let bucket: Vec<usize> = squared_radii(s.height, s.width)
        .into_iter()
        .map(|d2| floor_sqrt(d2) as usize)
        .collect();
    let mut sum = vec![0.0; buckets];
    let mut count = vec![0usize; buckets];
    for plane in spectrum.data().chunks_exact(s.plane_len()) {
        for (z, &b) in plane.iter().zip(&bucket) {
            sum[b] += z.norm();
            count[b] += 1;
        }
    }
    let mean_amplitude: Vec<Option<f64>> = sum
        .iter()
        .zip(&count)
        .map(|(&s, &n)| (n > 0).then(|| s / n as f64))
        .collect();
    let reference = match mean_amplitude[0] {
        Some(a) if a > 0.0 => a.ln(),
        _ => return Err(Error::UndefinedReference),
    };
    let relative_log = mean_amplitude
        .iter()
        .map(|a| a.filter(|&v| v > 0.0).map(|v| v.ln() - reference))
        .collect();
    Ok(RadialProfile {
        step: 0,
        mean_amplitude,
        relative_log,
    })
}

/// Fraction of the total `|U|` enclosed by each integer radius.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyCurve {
    pub step: usize,
    /// `(R, fraction)` for `R = 0 ..= ceil(max grid radius)`.
    pub points: Vec<(u32, f64)>,
}

impl EnergyCurve {
    pub fn at_step(mut self, step: usize) -> Self {
        self.step = step;
        self
    }

    /// Smallest radius whose enclosed fraction reaches `r0`.
    pub fn crossing(&self, r0: f64) -> u32 {
        self.points
            .iter()
            .find(|(_, f)| *f >= r0)
            .map_or_else(|| self.points.last().unwrap().0, |(r, _)| *r)
    }

    /// Enclosed fraction at radius `r` (1 beyond the grid).
    pub fn fraction_at(&self, r: u32) -> f64 {
        self.points.get(r as usize).map_or(1.0, |&(_, f)| f)
    }
}

pub fn energy_curve(spectrum: &SpectralField) -> Result<EnergyCurve> {
    let cumulative = cumulative_magnitude(spectrum);
    let total = *cumulative.last().unwrap();
    if total == 0.0 {
        return Err(Error::ZeroSpectrum);
    }
    let points = cumulative
        .iter()
        .enumerate()
        .map(|(r, &c)| (r as u32, c / total))
        .collect();
    Ok(EnergyCurve { step: 0, points })
}

/// Mean over steps of per-step, per-channel min-max normalized tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeAverageMap(pub LatentTensor);

/// Maps each step's channels to `[0, 1]` by min-max (constant channels to
/// 0.5) and averages over steps.
pub fn time_average(tensors: &[LatentTensor]) -> Result<TimeAverageMap> {
    let first = tensors.first().ok_or(Error::EmptyInput("no tensors to average"))?;
    let shape = first.shape();
    let mut acc = vec![0.0; shape.len()];
    for t in tensors {
        t.ensure_shape(shape)?;
        for (plane, out) in t.planes().zip(acc.chunks_exact_mut(shape.plane_len())) {
            let (lo, hi) = plane.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
            let range = hi - lo;
            for (o, &v) in out.iter_mut().zip(plane) {
                *o += if range > 0.0 { (v - lo) / range } else { 0.5 };
            }
        }
    }
    let n = tensors.len() as f64;
    let data = acc.into_iter().map(|v| (v / n).clamp(0.0, 1.0)).collect();
    Ok(TimeAverageMap(LatentTensor::from_parts(shape, data)))
}

fn push_value(out: &mut String, v: Option<f64>) {
    if let Some(v) = v {
        // 17 significant digits: enough to recover the exact f64.
        write!(out, "{v:.16e}").unwrap();
    }
}

pub fn profiles_csv(profiles: &[RadialProfile]) -> String {
    let mut out = String::from("step,radius,value\n");
    for p in profiles {
        for (r, v) in p.relative_log.iter().enumerate() {
            write!(out, "{},{},", p.step, r).unwrap();
            push_value(&mut out, *v);
            out.push('\n');
        }
    }
    out
}

pub fn curves_csv(curves: &[EnergyCurve]) -> String {
    let mut out = String::from("step,radius,value\n");
    for c in curves {
        for &(r, f) in &c.points {
            write!(out, "{},{},", c.step, r).unwrap();
            push_value(&mut out, Some(f));
            out.push('\n');
        }
    }
    out
}

pub fn map_csv(map: &TimeAverageMap) -> String {
    let t = &map.0;
    let s = t.shape();
    let mut out = String::from("y,x,channel,value\n");
    for y in 0..s.height {
        for x in 0..s.width {
            for c in 0..s.channels {
                write!(out, "{y},{x},{c},").unwrap();
                push_value(&mut out, Some(t.get(c, y, x)));
                out.push('\n');
            }
        }
    }
    out
}

/// Anything that can be written with [`export_csv`].
pub enum CsvTable<'a> {
    Profiles(&'a [RadialProfile]),
    Curves(&'a [EnergyCurve]),
    Map(&'a TimeAverageMap),
}

impl CsvTable<'_> {
    pub fn render(&self) -> String {
        match self {
            CsvTable::Profiles(p) => profiles_csv(p),
            CsvTable::Curves(c) => curves_csv(c),
            CsvTable::Map(m) => map_csv(m),
        }
    }
}

pub fn export_csv(table: CsvTable<'_>, destination: impl AsRef<Path>) -> Result<()> {
    write_atomic(destination.as_ref(), table.render().as_bytes())
}
