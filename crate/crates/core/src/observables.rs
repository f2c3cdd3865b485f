//! Ensemble statistics, structure functions and Wasserstein distances.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mc::Ensemble;
use crate::spaces::{BasisTable, FieldCoefficients, VelocitySpace};

mod locate;
mod structure;
mod wasserstein;

pub use locate::PointLocator;
pub use structure::{
    grid_size, make_hash_table, structure_function_curve, structure_function_ensemble,
    structure_function_of_sample, update_hash_table, write_structure_csv, HashEntry, HashGrid,
    StructureFunctionResult,
};
pub use wasserstein::{
    emd, hungarian, sample_ensemble, transport_min_cost_flow, wasserstein_distances, Atoms, EvalPoints,
    PairPoints, PointValues, WassersteinResult,
};

/// Mean of the field over every element.
pub fn element_average(space: &VelocitySpace, field: &FieldCoefficients) -> Result<Vec<[f64; 2]>> {
    if field.tag != space.tag() {
        return Err(Error::contract("field belongs to a different space"));
    }
    let mesh = space.mesh();
    (0..mesh.n_elements())
        .map(|e| {
            let t = space.tabulate_volume(e)?;
            let c = space.local_coeffs(&field.coeffs, e);
            let mut s = [0.0; 2];
            for q in 0..t.n_points() {
                let v = t.value(q, &c);
                s[0] += t.jxw[q] * v[0];
                s[1] += t.jxw[q] * v[1];
            }
            let area = mesh.element_area(e);
            Ok([s[0] / area, s[1] / area])
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatisticKind {
    Mean,
    Variance,
}

impl StatisticKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StatisticKind::Mean => "mean",
            StatisticKind::Variance => "variance",
        }
    }
}

/// A pointwise ensemble statistic, evaluable anywhere on its mesh.
///
/// The mean is kept as one coefficient vector; the variance keeps all
/// members and is formed pointwise.
#[derive(Debug, Clone)]
pub struct EnsembleStatistic {
    kind: StatisticKind,
    space: Arc<VelocitySpace>,
    coeffs: Vec<Vec<f64>>,
    time: f64,
}

/// Sample mean of the ensemble.
pub fn ensemble_mean(ens: &Ensemble) -> EnsembleStatistic {
    let n = ens.space.n_dofs();
    let mut mean = vec![0.0; n];
    for f in ens.fields() {
        for (m, c) in mean.iter_mut().zip(&f.coeffs) {
            *m += c;
        }
    }
    let inv = 1.0 / ens.len() as f64;
    mean.iter_mut().for_each(|m| *m *= inv);
    EnsembleStatistic {
        kind: StatisticKind::Mean,
        space: ens.space.clone(),
        coeffs: vec![mean],
        time: ens.time,
    }
}

/// Unbiased sample variance `M/(M-1) (E[u^2] - E[u]^2)`, componentwise.
pub fn ensemble_variance(ens: &Ensemble) -> Result<EnsembleStatistic> {
    if ens.len() < 2 {
        return Err(Error::invalid("the sample variance needs at least two members"));
    }
    Ok(EnsembleStatistic {
        kind: StatisticKind::Variance,
        space: ens.space.clone(),
        coeffs: ens.fields().map(|f| f.coeffs.clone()).collect(),
        time: ens.time,
    })
}

impl EnsembleStatistic {
    /// The field itself, as the mean of a one-member ensemble.
    pub fn from_field(space: Arc<VelocitySpace>, field: &FieldCoefficients) -> Result<Self> {
        if field.tag != space.tag() {
            return Err(Error::contract("field belongs to a different space"));
        }
        Ok(EnsembleStatistic {
            kind: StatisticKind::Mean,
            space,
            coeffs: vec![field.coeffs.clone()],
            time: field.time,
        })
    }

    pub fn kind(&self) -> StatisticKind {
        self.kind
    }

    pub fn space(&self) -> &Arc<VelocitySpace> {
        &self.space
    }

    /// The mean as a discrete field; `None` for the variance.
    pub fn mean_field(&self) -> Option<FieldCoefficients> {
        (self.kind == StatisticKind::Mean)
            .then(|| FieldCoefficients::new(self.space.tag(), self.coeffs[0].clone(), self.time))
    }

    fn values_from_table(&self, e: usize, t: &BasisTable) -> Vec<[f64; 2]> {
        let np = t.n_points();
        match self.kind {
            StatisticKind::Mean => {
                let c = self.space.local_coeffs(&self.coeffs[0], e);
                (0..np).map(|q| t.value(q, &c)).collect()
            }
            StatisticKind::Variance => {
                let m = self.coeffs.len() as f64;
                let mut s1 = vec![[0.0; 2]; np];
                let mut s2 = vec![[0.0; 2]; np];
                for coeffs in &self.coeffs {
                    let c = self.space.local_coeffs(coeffs, e);
                    for q in 0..np {
                        let v = t.value(q, &c);
                        for k in 0..2 {
                            s1[q][k] += v[k];
                            s2[q][k] += v[k] * v[k];
                        }
                    }
                }
                s1.iter()
                    .zip(&s2)
                    .map(|(a, b)| {
                        let mut out = [0.0; 2];
                        for k in 0..2 {
                            let mean = a[k] / m;
                            out[k] = m / (m - 1.0) * (b[k] / m - mean * mean);
                        }
                        out
                    })
                    .collect()
            }
        }
    }

    /// Values at reference points of element `e`.
    pub fn values_at(&self, e: usize, ref_points: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
        let t = self.space.tabulate(e, ref_points, None)?;
        Ok(self.values_from_table(e, &t))
    }

    pub fn l2_norm(&self) -> Result<f64> {
        let mut s = 0.0;
        for e in 0..self.space.mesh().n_elements() {
            let t = self.space.tabulate_volume(e)?;
            for (v, w) in self.values_from_table(e, &t).iter().zip(&t.jxw) {
                s += w * (v[0] * v[0] + v[1] * v[1]);
            }
        }
        Ok(s.sqrt())
    }

    /// Element means of the statistic.
    pub fn element_averages(&self) -> Result<Vec<[f64; 2]>> {
        let mesh = self.space.mesh();
        (0..mesh.n_elements())
            .map(|e| {
                let t = self.space.tabulate_volume(e)?;
                let mut s = [0.0; 2];
                for (v, w) in self.values_from_table(e, &t).iter().zip(&t.jxw) {
                    s[0] += w * v[0];
                    s[1] += w * v[1];
                }
                let area = mesh.element_area(e);
                Ok([s[0] / area, s[1] / area])
            })
            .collect()
    }
}

/// `||a - b||_{L2}` on the mesh of `b`, which must equal or refine the mesh of
/// `a`; `a` is evaluated at the quadrature points of `b`.
pub fn cauchy_error(a: &EnsembleStatistic, b: &EnsembleStatistic) -> Result<f64> {
    if a.kind != b.kind {
        return Err(Error::contract("cannot compare a mean with a variance"));
    }
    let (ma, mb) = (a.space.mesh(), b.space.mesh());
    let same_mesh = ma.checksum() == mb.checksum();
    let locator = (!same_mesh).then(|| PointLocator::new(ma.clone()));
    let (ba, bb) = (ma.bounding_box(), mb.bounding_box());
    let tol = 1e-9 * (ba.width() + ba.height());
    if (ba.x0 - bb.x0).abs() > tol
        || (ba.x1 - bb.x1).abs() > tol
        || (ba.y0 - bb.y0).abs() > tol
        || (ba.y1 - bb.y1).abs() > tol
    {
        return Err(Error::contract("statistics live on different domains"));
    }
    let mut s = 0.0;
    for e in 0..mb.n_elements() {
        let t = b.space.tabulate_volume(e)?;
        let vb = b.values_from_table(e, &t);
        let va = match &locator {
            None => a.values_from_table(e, &t),
            Some(loc) => {
                let incompatible = || Error::contract(format!("element {e} of the finer mesh is not nested in the coarser mesh"));
                let (parent, _) = loc.locate(mb.centroid(e)).ok_or_else(incompatible)?;
                let refs = t
                    .points
                    .iter()
                    .map(|&x| loc.reference_point(parent, x).ok_or_else(incompatible))
                    .collect::<Result<Vec<_>>>()?;
                a.values_at(parent, &refs)?
            }
        };
        for q in 0..t.n_points() {
            let d = [va[q][0] - vb[q][0], va[q][1] - vb[q][1]];
            s += t.jxw[q] * (d[0] * d[0] + d[1] * d[1]);
        }
    }
    Ok(s.sqrt())
}

/// Two-column `statistic,value` table.
pub fn write_value_table(path: &Path, rows: &[(String, f64)]) -> Result<()> {
    let mut s = String::from("statistic,value\n");
    for (name, v) in rows {
        let _ = writeln!(s, "{name},{v:e}");
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Element-wise mean and variance averages with element centroids.
pub fn write_element_statistics_csv(path: &Path, mean: &EnsembleStatistic, variance: Option<&EnsembleStatistic>) -> Result<()> {
    let mesh = mean.space.mesh();
    let m = mean.element_averages()?;
    let v = variance.map(|v| v.element_averages()).transpose()?;
    let mut s = String::from("element,x,y,mean_u1,mean_u2,var_u1,var_u2\n");
    for e in 0..mesh.n_elements() {
        let c = mesh.centroid(e);
        let (v1, v2) = v.as_ref().map_or((f64::NAN, f64::NAN), |v| (v[e][0], v[e][1]));
        let _ = writeln!(s, "{e},{:e},{:e},{:e},{:e},{:e},{:e}", c[0], c[1], m[e][0], m[e][1], v1, v2);
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}
