//! Text checkpoint format.
//!
//! ```text
//! dmdsc-checkpoint v1
//! [net]
//! input_dim 16
//! ...
//! [params]
//! values 1.2345678901234567e-1 ...
//! sha256 <hex digest of every byte above this line>
//! ```
//!
//! Reals are written with 17 significant digits, which round-trips every
//! `f64` exactly. The trailing digest catches truncation and corruption.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use dmdsc_core::net::{Activation, NetConfig, NetParams};
use dmdsc_core::train::{Checkpoint, MarginMode, TrainConfig};
use dmdsc_core::{EtfCenters, MarginSchedule, Matrix};
use sha2::{Digest, Sha256};

use crate::fsutil::write_atomic;
use crate::{Error, Result};

pub const MAGIC: &str = "dmdsc-checkpoint";
pub const VERSION: &str = "v1";
const DIGEST_KEY: &str = "sha256 ";

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn reals(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 24);
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{v:.16e}");
    }
    s
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

pub fn to_text(ckpt: &Checkpoint) -> String {
    let net = &ckpt.net_config;
    let tc = &ckpt.train_config;
    let mut body = String::new();
    let mut line = |s: String| {
        body.push_str(&s);
        body.push('\n');
    };
    line(format!("{MAGIC} {VERSION}"));

    line("[net]".into());
    line(format!("input_dim {}", net.input_dim));
    line(format!("hidden_dims {}", join(&net.hidden_dims)));
    line(format!("embed_dim {}", net.embed_dim));
    line(format!("activation {}", net.activation.name()));
    line(format!("seed {}", net.seed));

    line("[train]".into());
    line(format!("epochs {}", tc.epochs));
    line(format!("batch_size_known {}", tc.batch_size_known));
    line(format!("batch_size_bg {}", tc.batch_size_bg));
    line(format!("learning_rate {}", real(tc.learning_rate)));
    line(format!("rms_decay {}", real(tc.rms_decay)));
    line(format!("rms_epsilon {}", real(tc.rms_epsilon)));
    line(format!("lambda_inter {}", real(tc.lambda_inter)));
    line(format!("lambda_bg {}", real(tc.lambda_bg)));
    line(format!("m_min {}", real(tc.m_min)));
    line(format!("m_max {}", real(tc.m_max)));
    line(format!("radius {}", real(tc.radius)));
    line(format!("seed {}", tc.seed));
    line(format!("eval_every {}", tc.eval_every));
    line(format!("margin_mode {}", tc.margin_mode.name()));
    line(format!("square_margins {}", tc.square_margins));
    line(format!("completed_epochs {}", ckpt.epoch));

    let centers = ckpt.centers.as_matrix();
    line("[centers]".into());
    line(format!("radius {}", real(ckpt.centers.radius())));
    line(format!("rows {}", centers.rows()));
    line(format!("cols {}", centers.cols()));
    line(format!("values {}", reals(centers.as_slice())));

    let m = &ckpt.margins;
    line("[margins]".into());
    line(format!("m_min {}", real(m.m_min())));
    line(format!("m_max {}", real(m.m_max())));
    line(format!("class_counts {}", join(m.class_counts())));
    line(format!("values {}", reals(m.margins())));

    line("[params]".into());
    line(format!("len {}", ckpt.params.len()));
    line(format!("values {}", reals(ckpt.params.as_slice())));

    line("[optimizer]".into());
    line(format!("len {}", ckpt.optimizer_state.len()));
    line(format!("values {}", reals(&ckpt.optimizer_state)));

    let digest = Sha256::digest(body.as_bytes());
    let _ = writeln!(body, "{DIGEST_KEY}{}", hex(&digest));
    body
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    write_atomic(path, to_text(ckpt).as_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes, path)
}

/// Parses checkpoint bytes; `path` is only used in error messages.
pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let integrity = |reason: String| Error::Integrity {
        path: path.to_path_buf(),
        reason,
    };
    let text = std::str::from_utf8(bytes).map_err(|_| integrity("file is not valid UTF-8".into()))?;

    let first = text.lines().next().unwrap_or("");
    match first.split_once(' ') {
        Some((MAGIC, VERSION)) => {}
        Some((MAGIC, other)) => {
            return Err(Error::Version {
                path: path.to_path_buf(),
                found: other.to_string(),
                expected: VERSION,
            })
        }
        _ => return Err(integrity("missing checkpoint header".into())),
    }

    // the file must end with a complete digest line, newline included
    let complete = text
        .strip_suffix('\n')
        .ok_or_else(|| integrity("file is truncated".into()))?;
    let body_end = complete
        .rfind('\n')
        .map(|i| i + 1)
        .ok_or_else(|| integrity("file is truncated".into()))?;
    let (body, trailer) = complete.split_at(body_end);
    let stored = trailer
        .strip_prefix(DIGEST_KEY)
        .ok_or_else(|| integrity("checksum line missing; file is truncated".into()))?;
    let actual = hex(&Sha256::digest(body.as_bytes()));
    if stored != actual {
        return Err(integrity("checksum mismatch; file is truncated or corrupted".into()));
    }

    Sections::parse(body).and_then(|s| s.build()).map_err(integrity)
}

struct Sections<'a> {
    entries: BTreeMap<(&'a str, &'a str), &'a str>,
}

type Parsed<T> = std::result::Result<T, String>;

impl<'a> Sections<'a> {
    fn parse(body: &'a str) -> Parsed<Self> {
        let mut entries = BTreeMap::new();
        let mut section = "";
        for (i, line) in body.lines().enumerate().skip(1) {
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name;
                continue;
            }
            let (key, value) = line.split_once(' ').unwrap_or((line, ""));
            if section.is_empty() || entries.insert((section, key), value).is_some() {
                return Err(format!("line {}: unexpected entry {key:?}", i + 1));
            }
        }
        Ok(Self { entries })
    }

    fn raw(&self, section: &str, key: &str) -> Parsed<&'a str> {
        self.entries
            .get(&(section, key))
            .copied()
            .ok_or_else(|| format!("missing [{section}] {key}"))
    }

    fn get<T: std::str::FromStr>(&self, section: &str, key: &str) -> Parsed<T> {
        let raw = self.raw(section, key)?;
        raw.parse()
            .map_err(|_| format!("[{section}] {key}: cannot parse {raw:?}"))
    }

    fn list<T: std::str::FromStr>(&self, section: &str, key: &str) -> Parsed<Vec<T>> {
        self.raw(section, key)?
            .split_ascii_whitespace()
            .map(|t| t.parse().map_err(|_| format!("[{section}] {key}: cannot parse {t:?}")))
            .collect()
    }

    fn build(&self) -> Parsed<Checkpoint> {
        let core = |e: dmdsc_core::Error| e.to_string();

        let activation: String = self.get("net", "activation")?;
        let net_config = NetConfig {
            input_dim: self.get("net", "input_dim")?,
            hidden_dims: self.list("net", "hidden_dims")?,
            embed_dim: self.get("net", "embed_dim")?,
            activation: Activation::parse(&activation).ok_or_else(|| format!("unknown activation {activation:?}"))?,
            seed: self.get("net", "seed")?,
        };

        let mode: String = self.get("train", "margin_mode")?;
        let train_config = TrainConfig {
            epochs: self.get("train", "epochs")?,
            batch_size_known: self.get("train", "batch_size_known")?,
            batch_size_bg: self.get("train", "batch_size_bg")?,
            learning_rate: self.get("train", "learning_rate")?,
            rms_decay: self.get("train", "rms_decay")?,
            rms_epsilon: self.get("train", "rms_epsilon")?,
            lambda_inter: self.get("train", "lambda_inter")?,
            lambda_bg: self.get("train", "lambda_bg")?,
            m_min: self.get("train", "m_min")?,
            m_max: self.get("train", "m_max")?,
            radius: self.get("train", "radius")?,
            seed: self.get("train", "seed")?,
            eval_every: self.get("train", "eval_every")?,
            margin_mode: MarginMode::parse(&mode).ok_or_else(|| format!("unknown margin mode {mode:?}"))?,
            square_margins: self.get("train", "square_margins")?,
        };
        let epoch = self.get("train", "completed_epochs")?;

        let rows: usize = self.get("centers", "rows")?;
        let cols: usize = self.get("centers", "cols")?;
        let values = self.list("centers", "values")?;
        let centers = EtfCenters::from_parts(
            self.get("centers", "radius")?,
            Matrix::from_vec(rows, cols, values).map_err(core)?,
        )
        .map_err(core)?;

        let margins = MarginSchedule::from_parts(
            self.list("margins", "values")?,
            self.get("margins", "m_min")?,
            self.get("margins", "m_max")?,
            self.list("margins", "class_counts")?,
        )
        .map_err(core)?;

        let mut params = NetParams::zeros(&net_config).map_err(core)?;
        let values: Vec<f64> = self.list("params", "values")?;
        let len: usize = self.get("params", "len")?;
        if values.len() != len {
            return Err(format!("expected {len} parameters, found {}", values.len()));
        }
        params.set_values(&values).map_err(core)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err("parameters contain non-finite values".into());
        }

        let optimizer_state: Vec<f64> = self.list("optimizer", "values")?;
        let len: usize = self.get("optimizer", "len")?;
        if optimizer_state.len() != len {
            return Err(format!("expected {len} optimizer values, found {}", optimizer_state.len()));
        }

        Ok(Checkpoint {
            net_config,
            params,
            centers,
            margins,
            train_config,
            epoch,
            optimizer_state,
        })
    }
}
