use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::data::TrajectoryData;
use super::hankel::{build_hankel, check_persistent_excitation, ExcitationReport};
use crate::error::{Error, Result};
use crate::linalg::pinv;

const RECONSTRUCTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictorDims {
    pub inputs: usize,
    pub outputs: usize,
    pub past: usize,
    pub horizon: usize,
    pub columns: usize,
}

impl PredictorDims {
    /// Length of the stacked past trajectory `[u_ini; y_ini]`.
    pub fn past_len(&self) -> usize {
        (self.inputs + self.outputs) * self.past
    }

    pub fn future_inputs(&self) -> usize {
        self.inputs * self.horizon
    }

    pub fn future_outputs(&self) -> usize {
        self.outputs * self.horizon
    }
}

/// Data-driven multi-step predictor from the LQ factorization of the stacked
/// Hankel matrix `[U_P; Y_P; U_F; Y_F]`.
///
/// Future trajectories are parameterized as
/// `û = L21·g1 + L22·g2` and `ŷ = L31·g1 + L32·g2 + L33·g3`,
/// where `g1` is pinned by the measured past. The factor is taken of the
/// unscaled Hankel matrix, so regularization weights on `g2`, `g3` act
/// relative to the amount of data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GammaPredictor {
    pub dims: PredictorDims,
    pub l11: DMatrix<f64>,
    pub l21: DMatrix<f64>,
    pub l22: DMatrix<f64>,
    pub l31: DMatrix<f64>,
    pub l32: DMatrix<f64>,
    pub l33: DMatrix<f64>,
    pub pinv_l11: DMatrix<f64>,
    pub excitation: ExcitationReport,
    pub reconstruction_error: f64,
    pub orthogonality_error: f64,
}

impl GammaPredictor {
    pub fn build(data: &TrajectoryData, past: usize, horizon: usize) -> Result<Self> {
        data.validate()?;
        if past == 0 || horizon == 0 {
            return Err(Error::dims("past and horizon lengths must be at least 1"));
        }
        let (m, p) = (data.input_dim(), data.output_dim());
        let depth = past + horizon;
        let hu = build_hankel(&data.inputs, depth)?;
        let hy = build_hankel(&data.outputs, depth)?;
        let cols = hu.ncols();
        let (zp, uf, yf) = ((m + p) * past, m * horizon, p * horizon);
        let rows = zp + uf + yf;
        if cols < rows {
            return Err(Error::dims(format!(
                "stacked Hankel matrix has {cols} columns but {rows} rows; collect at least {} samples",
                rows + depth - 1
            )));
        }
        let excitation = check_persistent_excitation(&data.inputs, depth);
        if !excitation.persistently_exciting {
            log::warn!(
                "input data is not persistently exciting of order {depth} (rank {} of {})",
                excitation.rank,
                excitation.rows
            );
        }

        let mut h = DMatrix::zeros(rows, cols);
        h.view_mut((0, 0), (m * past, cols)).copy_from(&hu.rows(0, m * past));
        h.view_mut((m * past, 0), (p * past, cols)).copy_from(&hy.rows(0, p * past));
        h.view_mut((zp, 0), (uf, cols)).copy_from(&hu.rows(m * past, uf));
        h.view_mut((zp + uf, 0), (yf, cols)).copy_from(&hy.rows(p * past, yf));

        // H = L·Q with L = Rᵀ and Q = Q_tᵀ from the thin QR of Hᵀ.
        let qr = h.transpose().qr();
        let l = qr.r().transpose();
        let q = qr.q().transpose();
        let h_norm = h.norm().max(f64::MIN_POSITIVE);
        let reconstruction_error = (&l * &q - &h).norm() / h_norm;
        let orthogonality_error = (&q * q.transpose() - DMatrix::<f64>::identity(rows, rows)).norm();
        if reconstruction_error > RECONSTRUCTION_TOL || orthogonality_error > RECONSTRUCTION_TOL * rows as f64 {
            return Err(Error::ReconstructionFailure(format!(
                "relative residual {reconstruction_error:.3e}, orthogonality defect {orthogonality_error:.3e}"
            )));
        }

        let block = |r0: usize, nr: usize, c0: usize, nc: usize| l.view((r0, c0), (nr, nc)).into_owned();
        let l11 = block(0, zp, 0, zp);
        let pinv_l11 = pinv(&l11);
        Ok(Self {
            dims: PredictorDims { inputs: m, outputs: p, past, horizon, columns: cols },
            l21: block(zp, uf, 0, zp),
            l22: block(zp, uf, zp, uf),
            l31: block(zp + uf, yf, 0, zp),
            l32: block(zp + uf, yf, zp, uf),
            l33: block(zp + uf, yf, zp + uf, yf),
            l11,
            pinv_l11,
            excitation,
            reconstruction_error,
            orthogonality_error,
        })
    }

    /// Stack past inputs and outputs (oldest first) into `[u_ini; y_ini]`.
    pub fn stack_past(&self, u_ini: &[Vec<f64>], y_ini: &[Vec<f64>]) -> Result<DVector<f64>> {
        let d = self.dims;
        if u_ini.len() != d.past || y_ini.len() != d.past {
            return Err(Error::dims(format!("past window must have length {}", d.past)));
        }
        if u_ini.iter().any(|u| u.len() != d.inputs) || y_ini.iter().any(|y| y.len() != d.outputs) {
            return Err(Error::dims("past window entries have wrong dimension"));
        }
        Ok(DVector::from_iterator(d.past_len(), u_ini.iter().flatten().chain(y_ini.iter().flatten()).copied()))
    }

    /// Coefficients pinned by the past: the minimum-norm solution of `L11·g1 = z_ini`.
    pub fn gamma1(&self, z_ini: &DVector<f64>) -> Result<DVector<f64>> {
        if z_ini.len() != self.dims.past_len() {
            return Err(Error::dims(format!(
                "past trajectory has length {}, expected {}",
                z_ini.len(),
                self.dims.past_len()
            )));
        }
        Ok(&self.pinv_l11 * z_ini)
    }

    /// Predicted future inputs and outputs.
    pub fn predict(
        &self,
        gamma2: &DVector<f64>,
        gamma3: &DVector<f64>,
        gamma1: &DVector<f64>,
    ) -> Result<(DVector<f64>, DVector<f64>)> {
        let d = self.dims;
        if gamma2.len() != d.future_inputs() || gamma3.len() != d.future_outputs() || gamma1.len() != d.past_len() {
            return Err(Error::dims("coefficient vectors have wrong length"));
        }
        let u = &self.l21 * gamma1 + &self.l22 * gamma2;
        let y = &self.l31 * gamma1 + &self.l32 * gamma2 + &self.l33 * gamma3;
        Ok((u, y))
    }
}
