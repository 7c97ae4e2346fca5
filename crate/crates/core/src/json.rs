//! JSON encodings shared by the library and the CLI.
//!
//! Conventions: complex scalars as `[re, im]` pairs of doubles, matrices
//! row-major, floats rounded to 12 significant digits so that reports are
//! byte-stable across runs.

use crate::algebra::MultiMatrixAlgebra;
use crate::error::{Error, Result};
use crate::{C64, CMat};
use serde_json::{json, Value};

/// Round to 12 significant digits for stable report output.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let mag = x.abs().log10().floor();
    let factor = 10f64.powi(11 - mag as i32);
    (x * factor).round() / factor
}

/// JSON number with fixed significant precision.
pub fn jnum(x: f64) -> Value {
    if x.is_finite() {
        json!(round_sig(x))
    } else {
        json!(format!("{x}"))
    }
}

pub fn complex_to_json(z: C64) -> Value {
    json!([jnum(z.re), jnum(z.im)])
}

pub fn complex_from_json(v: &Value) -> Result<C64> {
    let arr = v
        .as_array()
        .ok_or_else(|| Error::InvalidInput("complex scalar must be a [re, im] pair".into()))?;
    if arr.len() != 2 {
        return Err(Error::InvalidInput(
            "complex scalar must have exactly two entries".into(),
        ));
    }
    let re = arr[0]
        .as_f64()
        .ok_or_else(|| Error::InvalidInput("complex part must be a number".into()))?;
    let im = arr[1]
        .as_f64()
        .ok_or_else(|| Error::InvalidInput("complex part must be a number".into()))?;
    Ok(C64::new(re, im))
}

pub fn matrix_to_json(m: &CMat) -> Value {
    let rows: Vec<Value> = (0..m.nrows())
        .map(|r| {
            (0..m.ncols())
                .map(|c| complex_to_json(m[(r, c)]))
                .collect::<Vec<_>>()
                .into()
        })
        .collect();
    json!(rows)
}

pub fn matrix_from_json(v: &Value) -> Result<CMat> {
    let rows = v
        .as_array()
        .ok_or_else(|| Error::InvalidInput("matrix must be an array of rows".into()))?;
    let nrows = rows.len();
    let mut data: Vec<Vec<C64>> = Vec::with_capacity(nrows);
    for row in rows {
        let cells = row
            .as_array()
            .ok_or_else(|| Error::InvalidInput("matrix row must be an array".into()))?;
        data.push(cells.iter().map(complex_from_json).collect::<Result<_>>()?);
    }
    let ncols = data.first().map_or(0, |r| r.len());
    if data.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidInput("ragged matrix rows".into()));
    }
    Ok(CMat::from_fn(nrows, ncols, |r, c| data[r][c]))
}

pub fn algebra_to_json(a: &MultiMatrixAlgebra) -> Value {
    json!({
        "blocks": a.blocks().to_vec(),
        "label": a.label(),
    })
}

pub fn algebra_from_json(v: &Value) -> Result<MultiMatrixAlgebra> {
    let blocks = v
        .get("blocks")
        .and_then(|b| b.as_array())
        .ok_or_else(|| Error::InvalidInput("algebra needs a \"blocks\" array".into()))?;
    let sizes: Vec<usize> = blocks
        .iter()
        .map(|b| {
            b.as_u64()
                .map(|n| n as usize)
                .ok_or_else(|| Error::InvalidInput("block size must be a nonnegative integer".into()))
        })
        .collect::<Result<_>>()?;
    let label = v
        .get("label")
        .and_then(|l| l.as_str())
        .unwrap_or("A")
        .to_string();
    MultiMatrixAlgebra::new(sizes, label)
}


/// Parse raw (pre-canonical) module data:
/// `{"dim": d, "base": algebra, "form": [[element]],
///   "right_action": {"<basis>": matrix}, "left_action": {"<basis>": matrix}}`
/// where an element is a list of per-block matrices.  Returns the raw
/// module and, when present, the raw left-action matrices indexed by the
/// source dimension implied by the map.
pub fn raw_module_from_json(
    v: &Value,
) -> Result<(crate::corr::RawModule, Option<Vec<CMat>>)> {
    let base = algebra_from_json(
        v.get("base")
            .ok_or_else(|| Error::InvalidInput("raw module needs a base algebra".into()))?,
    )?;
    let dim = v
        .get("dim")
        .and_then(|d| d.as_u64())
        .ok_or_else(|| Error::InvalidInput("raw module needs a dim".into()))? as usize;
    let element_from = |e: &Value| -> Result<crate::algebra::AlgebraElement> {
        let mats = e
            .as_array()
            .ok_or_else(|| Error::InvalidInput("element must be a list of block matrices".into()))?
            .iter()
            .map(matrix_from_json)
            .collect::<Result<Vec<_>>>()?;
        base.element(mats)
    };
    let form_rows = v
        .get("form")
        .and_then(|f| f.as_array())
        .ok_or_else(|| Error::InvalidInput("raw module needs a form".into()))?;
    if form_rows.len() != dim {
        return Err(Error::InvalidInput("form has the wrong number of rows".into()));
    }
    let mut form = Vec::with_capacity(dim);
    for row in form_rows {
        let cells = row
            .as_array()
            .ok_or_else(|| Error::InvalidInput("form row must be an array".into()))?;
        if cells.len() != dim {
            return Err(Error::InvalidInput("form has the wrong number of columns".into()));
        }
        form.push(cells.iter().map(element_from).collect::<Result<Vec<_>>>()?);
    }
    let action_map = |key: &str| -> Result<Option<Vec<CMat>>> {
        let Some(obj) = v.get(key).and_then(|a| a.as_object()) else {
            return Ok(None);
        };
        let n = obj.len();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let m = obj.get(&i.to_string()).ok_or_else(|| {
                Error::InvalidInput(format!("{key} is missing basis index {i}"))
            })?;
            out.push(matrix_from_json(m)?);
        }
        Ok(Some(out))
    };
    let right = action_map("right_action")?
        .ok_or_else(|| Error::InvalidInput("raw module needs a right_action".into()))?;
    if right.len() != base.dim() {
        return Err(Error::InvalidInput(
            "right_action must cover every base matrix unit".into(),
        ));
    }
    let left = action_map("left_action")?;
    Ok((
        crate::corr::RawModule {
            base,
            dim,
            right,
            form,
        },
        left,
    ))
}
