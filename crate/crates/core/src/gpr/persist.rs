//! JSON model files. Every float is stored as the 16-digit hex of its IEEE-754
//! bits so a round trip is exact; the Cholesky factor is recomputed on load
//! with the recorded jitter, which reproduces it bit for bit.

use serde::{Deserialize, Serialize};

use super::{GpError, GpModel, Hyperparameters, Scaler};

pub const MODEL_SCHEMA_VERSION: u32 = 1;
const SCHEMA_NAME: &str = "gppopf.gp_model";

type Hex = String;

fn enc(v: f64) -> Hex {
    format!("{:016x}", v.to_bits())
}

fn dec(s: &str) -> Result<f64, GpError> {
    u64::from_str_radix(s, 16)
        .map(f64::from_bits)
        .map_err(|_| GpError::Format(format!("bad float encoding {s:?}")))
}

fn enc_vec(v: &[f64]) -> Vec<Hex> {
    v.iter().map(|x| enc(*x)).collect()
}

fn dec_vec(v: &[Hex]) -> Result<Vec<f64>, GpError> {
    v.iter().map(|s| dec(s)).collect()
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema: String,
    version: u32,
    n_train: usize,
    dim: usize,
    l: Hex,
    sigma_f: Hex,
    sigma_n: Hex,
    jitter: Hex,
    lml: Hex,
    constant: bool,
    x_mean: Vec<Hex>,
    x_scale: Vec<Hex>,
    y_mean: Hex,
    y_scale: Hex,
    /// Standardized inputs, row-major.
    x_train: Vec<Hex>,
    y_train: Vec<Hex>,
    alpha: Vec<Hex>,
}

impl GpModel {
    pub fn to_json(&self) -> String {
        let f = ModelFile {
            schema: SCHEMA_NAME.into(),
            version: MODEL_SCHEMA_VERSION,
            n_train: self.n_train,
            dim: self.dim,
            l: enc(self.hp.l),
            sigma_f: enc(self.hp.sigma_f),
            sigma_n: enc(self.hp.sigma_n),
            jitter: enc(self.jitter),
            lml: enc(self.lml),
            constant: self.constant,
            x_mean: enc_vec(&self.x_scaler.mean),
            x_scale: enc_vec(&self.x_scaler.scale),
            y_mean: enc(self.y_mean),
            y_scale: enc(self.y_scale),
            x_train: enc_vec(&self.x_train),
            y_train: enc_vec(&self.y_train),
            alpha: enc_vec(&self.alpha),
        };
        serde_json::to_string_pretty(&f).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GpError> {
        let f: ModelFile = serde_json::from_str(text).map_err(|e| GpError::Format(e.to_string()))?;
        if f.schema != SCHEMA_NAME {
            return Err(GpError::Format(format!("unexpected schema {:?}", f.schema)));
        }
        if f.version != MODEL_SCHEMA_VERSION {
            return Err(GpError::Format(format!(
                "schema version {} is not supported (expected {MODEL_SCHEMA_VERSION})",
                f.version
            )));
        }
        let x_train = dec_vec(&f.x_train)?;
        let y_train = dec_vec(&f.y_train)?;
        let alpha = dec_vec(&f.alpha)?;
        let x_scaler = Scaler {
            mean: dec_vec(&f.x_mean)?,
            scale: dec_vec(&f.x_scale)?,
        };
        if x_train.len() != f.n_train * f.dim
            || y_train.len() != f.n_train
            || alpha.len() != f.n_train
            || x_scaler.mean.len() != f.dim
            || x_scaler.scale.len() != f.dim
        {
            return Err(GpError::Format("array lengths disagree with n_train/dim".into()));
        }
        let hp = Hyperparameters {
            l: dec(&f.l)?,
            sigma_f: dec(&f.sigma_f)?,
            sigma_n: dec(&f.sigma_n)?,
        };
        GpModel::from_parts(
            x_train,
            y_train,
            f.dim,
            x_scaler,
            dec(&f.y_mean)?,
            dec(&f.y_scale)?,
            hp,
            dec(&f.jitter)?,
            alpha,
            dec(&f.lml)?,
            f.constant,
        )
    }
}
