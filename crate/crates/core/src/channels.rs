//! Seeded channel ensembles.
//!
//! Every sample owns an independent ChaCha stream selected by its split and
//! index, so growing `Q` or `E` never perturbs samples that already exist and
//! samples can be generated in parallel.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64};
use crate::system::{perfect_sqrt, validate_params, ChannelSample, SystemParams};

/// Redraw attempts per sample before the model is declared degenerate.
pub const MAX_REDRAWS: usize = 100;

const MAGIC: &[u8; 4] = b"RISC";
const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 5 * 4 + 8 + 8 + 8 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ChannelModel {
    /// i.i.d. CN(0, 1) entries.
    IidRayleigh,
    /// `√(κ/(1+κ))·H_LoS + √(1/(1+κ))·H_NLoS` with array-steering LoS terms.
    Rician { k_factor: f64 },
}

impl ChannelModel {
    pub fn tag(&self) -> &'static str {
        match self {
            ChannelModel::IidRayleigh => "iid_rayleigh",
            ChannelModel::Rician { .. } => "rician",
        }
    }

    fn code(&self) -> u32 {
        match self {
            ChannelModel::IidRayleigh => 0,
            ChannelModel::Rician { .. } => 1,
        }
    }

    fn k_factor(&self) -> f64 {
        match self {
            ChannelModel::IidRayleigh => 0.0,
            ChannelModel::Rician { k_factor } => *k_factor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Training,
    Evaluation,
}

impl Split {
    fn stream(self, index: usize) -> u64 {
        let split = match self {
            Split::Training => 0u64,
            Split::Evaluation => 1u64,
        };
        (split << 40) | index as u64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEnsemble {
    pub params: SystemParams,
    pub training: Vec<ChannelSample>,
    pub evaluation: Vec<ChannelSample>,
    pub model: ChannelModel,
    pub seed: u64,
}

impl ChannelEnsemble {
    pub fn q(&self) -> usize {
        self.training.len()
    }

    pub fn e(&self) -> usize {
        self.evaluation.len()
    }
}

pub fn generate_ensemble(
    params: &SystemParams,
    q_train: usize,
    e_eval: usize,
    model: ChannelModel,
    seed: u64,
) -> Result<ChannelEnsemble> {
    let params = validate_params(params.clone())?;
    if q_train == 0 {
        return Err(Error::InvalidArgument("at least one training sample is required".into()));
    }
    if let ChannelModel::Rician { k_factor } = model {
        if !(k_factor >= 0.0 && k_factor.is_finite()) {
            return Err(Error::InvalidArgument(format!("Rician K-factor {k_factor} must be ≥ 0")));
        }
    }
    let draw = |split: Split, count: usize| -> Result<Vec<ChannelSample>> {
        (0..count)
            .into_par_iter()
            .map(|i| draw_sample(&params, model, seed, split, i))
            .collect()
    };
    let training = draw(Split::Training, q_train)?;
    let evaluation = draw(Split::Evaluation, e_eval)?;
    Ok(ChannelEnsemble {
        params,
        training,
        evaluation,
        model,
        seed,
    })
}

/// Draws sample `index` of `split`; identical for identical arguments.
pub fn draw_sample(
    params: &SystemParams,
    model: ChannelModel,
    seed: u64,
    split: Split,
    index: usize,
) -> Result<ChannelSample> {
    let (n, k, m) = (params.n_bs_antennas, params.n_users, params.n_ris_elements);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(split.stream(index));
    // LoS geometry comes from its own stream so the NLoS draws are shared
    // bit-for-bit with the Rayleigh model.
    let mut los_rng = ChaCha20Rng::seed_from_u64(seed);
    los_rng.set_stream(split.stream(index) | (1 << 48));

    for _ in 0..MAX_REDRAWS {
        let mut h_br = gaussian_matrix(m, n, &mut rng);
        let mut h_ru = gaussian_matrix(m, k, &mut rng);
        if let ChannelModel::Rician { k_factor } = model {
            let (los_br, los_ru) = los_components(m, n, k, &mut los_rng);
            let a = (k_factor / (1.0 + k_factor)).sqrt();
            let b = (1.0 / (1.0 + k_factor)).sqrt();
            h_br = los_br * C64::new(a, 0.0) + h_br * C64::new(b, 0.0);
            h_ru = los_ru * C64::new(a, 0.0) + h_ru * C64::new(b, 0.0);
        }
        match ChannelSample::new(h_br, h_ru, params) {
            Ok(s) => return Ok(s),
            Err(Error::DegenerateChannel(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Generation(format!(
        "{split:?} sample {index} failed the rank-{k} check after {MAX_REDRAWS} draws"
    )))
}

/// Row-major fill with CN(0, 1) entries.
fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha20Rng) -> CMatrix {
    let mut m = CMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            m[(r, c)] = C64::new(re * FRAC_1_SQRT_2, im * FRAC_1_SQRT_2);
        }
    }
    m
}

/// Half-wavelength ULA at the BS.
fn ula_steering(n: usize, angle: f64) -> Vec<C64> {
    (0..n)
        .map(|i| C64::from_polar(1.0, PI * i as f64 * angle.sin()))
        .collect()
}

/// Half-wavelength √M×√M planar array at the RIS.
fn upa_steering(m: usize, azimuth: f64, elevation: f64) -> Vec<C64> {
    let side = perfect_sqrt(m).unwrap_or(1);
    let u = elevation.sin() * azimuth.cos();
    let v = elevation.sin() * azimuth.sin();
    (0..m)
        .map(|idx| {
            let (p, q) = (idx / side, idx % side);
            C64::from_polar(1.0, PI * (p as f64 * u + q as f64 * v))
        })
        .collect()
}

fn los_components(m: usize, n: usize, k: usize, rng: &mut ChaCha20Rng) -> (CMatrix, CMatrix) {
    let mut angle = |lo: f64, hi: f64| rng.random_range(lo..hi);
    let arrival = upa_steering(m, angle(-PI, PI), angle(0.0, PI / 2.0));
    let departure = ula_steering(n, angle(-PI / 2.0, PI / 2.0));
    let br = CMatrix::from_fn(m, n, |r, c| arrival[r] * departure[c].conj());
    let mut ru = CMatrix::zeros(m, k);
    for col in 0..k {
        let a = upa_steering(m, angle(-PI, PI), angle(0.0, PI / 2.0));
        for r in 0..m {
            ru[(r, col)] = a[r];
        }
    }
    (br, ru)
}

fn push_matrix(buf: &mut Vec<u8>, m: &CMatrix) {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            buf.extend_from_slice(&m[(r, c)].re.to_le_bytes());
            buf.extend_from_slice(&m[(r, c)].im.to_le_bytes());
        }
    }
}

/// Serializes to the `RISC` binary layout (see the crate README).
pub fn encode_ensemble(e: &ChannelEnsemble) -> Vec<u8> {
    let p = &e.params;
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&e.model.code().to_le_bytes());
    buf.extend_from_slice(&e.seed.to_le_bytes());
    for d in [p.n_bs_antennas, p.n_users, p.n_ris_elements, e.q(), e.e()] {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    buf.extend_from_slice(&e.model.k_factor().to_le_bytes());
    buf.extend_from_slice(&p.tx_power_dbm.to_le_bytes());
    buf.extend_from_slice(&p.noise_variance.to_le_bytes());
    buf.extend_from_slice(&p.rng_seed.to_le_bytes());
    debug_assert_eq!(buf.len(), HEADER_LEN);
    for set in [&e.training, &e.evaluation] {
        for s in set.iter() {
            push_matrix(&mut buf, s.h_bs_ris());
        }
        for s in set.iter() {
            push_matrix(&mut buf, s.h_ris_users());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let s = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Format("unexpected end of file".into()))?;
        self.pos = end;
        Ok(s.try_into().expect("slice length"))
    }

    fn u32(&mut self) -> Result<u32> {
        self.take::<4>().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64> {
        self.take::<8>().map(u64::from_le_bytes)
    }

    fn f64(&mut self) -> Result<f64> {
        self.take::<8>().map(f64::from_le_bytes)
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<CMatrix> {
        let mut m = CMatrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                let re = self.f64()?;
                let im = self.f64()?;
                m[(r, c)] = C64::new(re, im);
            }
        }
        Ok(m)
    }
}

pub fn decode_ensemble(bytes: &[u8]) -> Result<ChannelEnsemble> {
    let mut rd = Reader { bytes, pos: 0 };
    if &rd.take::<4>()? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = rd.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let code = rd.u32()?;
    let seed = rd.u64()?;
    let mut dims = [0usize; 5];
    for d in dims.iter_mut() {
        *d = rd.u32()? as usize;
    }
    let [n, k, m, q, e] = dims;
    let kappa = rd.f64()?;
    let model = match code {
        0 => ChannelModel::IidRayleigh,
        1 => ChannelModel::Rician { k_factor: kappa },
        other => return Err(Error::Format(format!("unknown model tag {other}"))),
    };
    let params = SystemParams {
        n_bs_antennas: n,
        n_users: k,
        n_ris_elements: m,
        tx_power_dbm: rd.f64()?,
        noise_variance: rd.f64()?,
        rng_seed: rd.u64()?,
    };
    let params = validate_params(params).map_err(|e| Error::Format(format!("header: {e}")))?;

    let per_sample = 16 * (m * n + m * k);
    let expected = (q + e)
        .checked_mul(per_sample)
        .and_then(|p| p.checked_add(HEADER_LEN + 4))
        .ok_or_else(|| Error::Format("declared dimensions overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "length {} does not match declared dimensions (expected {expected})",
            bytes.len()
        )));
    }
    let body = &bytes[..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }

    let mut read_set = |count: usize| -> Result<Vec<ChannelSample>> {
        let brs = (0..count)
            .map(|_| rd.matrix(m, n))
            .collect::<Result<Vec<_>>>()?;
        let rus = (0..count)
            .map(|_| rd.matrix(m, k))
            .collect::<Result<Vec<_>>>()?;
        brs.into_iter()
            .zip(rus)
            .map(|(br, ru)| {
                ChannelSample::new(br, ru, &params).map_err(|e| Error::Format(format!("sample: {e}")))
            })
            .collect()
    };
    let training = read_set(q)?;
    let evaluation = read_set(e)?;
    Ok(ChannelEnsemble {
        params,
        training,
        evaluation,
        model,
        seed,
    })
}

pub fn save_ensemble(e: &ChannelEnsemble, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_ensemble(e)).map_err(|err| Error::io(path, err))
}

pub fn load_ensemble(path: impl AsRef<Path>) -> Result<ChannelEnsemble> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|err| Error::io(path, err))?;
    decode_ensemble(&bytes)
}
