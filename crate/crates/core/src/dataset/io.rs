//! Text format, one file per partition:
//!
//! ```text
//! #relate-ts v1 channels=<C> length=<L> classes=<K>
//! <label>,<v_0>,...,<v_{C*L-1}>
//! ```
//!
//! Values are channel-major and written with 17 significant digits, which
//! round-trips `f64` exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{split_dataset, Dataset, Sample};
use crate::error::{Error, Result};
use crate::scalar::Real;

const MAGIC: &str = "#relate-ts v1";

/// Seed used to regenerate a missing `val.csv` from `train.csv`.
pub const RESPLIT_SEED: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitHeader {
    pub channels: usize,
    pub length: usize,
    pub classes: usize,
}

fn parse_header(path: &Path, line: &str) -> Result<SplitHeader> {
    let err = |msg: String| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        msg,
    };
    let rest = line
        .strip_prefix(MAGIC)
        .ok_or_else(|| err(format!("expected header starting with `{MAGIC}`")))?;
    let (mut c, mut l, mut k) = (None, None, None);
    for field in rest.split_whitespace() {
        let (key, val) = field
            .split_once('=')
            .ok_or_else(|| err(format!("malformed header field `{field}`")))?;
        let v: usize = val
            .parse()
            .map_err(|_| err(format!("header field `{key}` is not an integer")))?;
        match key {
            "channels" => c = Some(v),
            "length" => l = Some(v),
            "classes" => k = Some(v),
            _ => return Err(err(format!("unknown header field `{key}`"))),
        }
    }
    let h = SplitHeader {
        channels: c.ok_or_else(|| err("missing channels".into()))?,
        length: l.ok_or_else(|| err("missing length".into()))?,
        classes: k.ok_or_else(|| err("missing classes".into()))?,
    };
    if h.channels == 0 || h.length == 0 || h.classes == 0 {
        return Err(err("channels, length and classes must be positive".into()));
    }
    Ok(h)
}

pub fn read_split<T: Real>(path: &Path) -> Result<(SplitHeader, Vec<Sample<T>>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = parse_header(path, lines.next().unwrap_or(""))?;
    let width = header.channels * header.length;
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: lineno,
            msg,
        };
        let mut fields = line.split(',');
        let label: usize = fields
            .next()
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|_| err("label is not a non-negative integer".into()))?;
        if label >= header.classes {
            return Err(err(format!("label {label} >= classes {}", header.classes)));
        }
        let mut values = Vec::with_capacity(width);
        for f in fields {
            let v: f64 = f.trim().parse().map_err(|_| err(format!("`{f}` is not a number")))?;
            if !v.is_finite() {
                return Err(err(format!("non-finite value `{f}`")));
            }
            values.push(T::lit(v));
        }
        if values.len() != width {
            return Err(err(format!("expected {width} values, found {}", values.len())));
        }
        samples.push(Sample::new(values, header.channels, header.length, label)?);
    }
    Ok((header, samples))
}

pub fn write_split<T: Real>(path: &Path, header: SplitHeader, samples: &[Sample<T>]) -> Result<()> {
    let mut out = format!(
        "{MAGIC} channels={} length={} classes={}\n",
        header.channels, header.length, header.classes
    );
    for s in samples {
        write!(out, "{}", s.label).unwrap();
        for v in s.values() {
            write!(out, ",{:.16e}", v.as_f64()).unwrap();
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a dataset directory (`train.csv`, optional `val.csv`, `test.csv`).
/// The dataset is named after the directory.
pub fn read_dataset<T: Real>(dir: &Path) -> Result<Dataset<T>> {
    let (h_train, pool) = read_split::<T>(&dir.join("train.csv"))?;
    let (h_test, test) = read_split::<T>(&dir.join("test.csv"))?;
    let val_path = dir.join("val.csv");
    let (train, val) = if val_path.exists() {
        let (h_val, val) = read_split::<T>(&val_path)?;
        check_same(&val_path, h_train, h_val)?;
        (pool, val)
    } else {
        split_dataset(&pool, RESPLIT_SEED)?
    };
    check_same(&dir.join("test.csv"), h_train, h_test)?;
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let ds = Dataset {
        name,
        classes: h_train.classes,
        channels: h_train.channels,
        length: h_train.length,
        train,
        val,
        test,
    };
    ds.validate()?;
    Ok(ds)
}

fn check_same(path: &Path, a: SplitHeader, b: SplitHeader) -> Result<()> {
    if a != b {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: format!("header {b:?} disagrees with train.csv {a:?}"),
        });
    }
    Ok(())
}

pub fn write_dataset<T: Real>(ds: &Dataset<T>, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let h = SplitHeader {
        channels: ds.channels,
        length: ds.length,
        classes: ds.classes,
    };
    write_split(&dir.join("train.csv"), h, &ds.train)?;
    write_split(&dir.join("val.csv"), h, &ds.val)?;
    write_split(&dir.join("test.csv"), h, &ds.test)
}
