//! Subcommand implementations: each returns the report JSON and an exit
//! code (0 all checks pass, 1 a check failed).

use crate::lower::{lower_document, Lowered};
use corrlim::colimit::{emit_presentation, recognize_closed_form, ClosedForm};
use corrlim::concrete_eval::{eval_direct_sum, eval_fell_bundle, eval_stabilized_chain};
use corrlim::diagram::validate_functor;
use corrlim::json::jnum;
use corrlim::repcheck::{check_representation, RepAssignment};
use corrlim::shapes::Shape;
use corrlim::transform::{compose_transformations, validate_transformation};
use serde_json::{json, Value};

pub struct Options {
    pub tol: f64,
    pub depth: usize,
    pub seed: u64,
}

pub type CmdResult = Result<(Value, i32), String>;

fn load(path: &str, opts: &Options) -> Result<Lowered, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {path}: {e}"))?;
    let doc = crate::dsl::parse_document(&text).map_err(|e| e.to_string())?;
    lower_document(&doc, opts.depth, opts.tol).map_err(|e| e.to_string())
}

pub fn cmd_validate(path: &str, opts: &Options) -> CmdResult {
    let lowered = load(path, opts)?;
    let report = validate_functor(&lowered.diagram, opts.tol).map_err(|e| e.to_string())?;
    let code = i32::from(!report.passed());
    Ok((
        json!({
            "command": "validate",
            "input": path,
            "report": report.to_json(),
        }),
        code,
    ))
}

pub fn cmd_colimit(path: &str, opts: &Options) -> CmdResult {
    let lowered = load(path, opts)?;
    let p = emit_presentation(&lowered.diagram).map_err(|e| e.to_string())?;
    // For recognized universal unitary matrix algebras the closed-form
    // presentation is the headline output; the defining presentation is
    // attached alongside.
    let (main, defining, closed) = match &p.closed_form {
        Some(ClosedForm::BrownMcClanahan {
            m,
            n,
            presentation,
            notes,
        }) => (
            presentation.to_json(),
            Some(strip_closed_form(&p)),
            json!({
                "name": "universal_unitary_matrix",
                "m": m,
                "n": n,
                "notes": notes,
            }),
        ),
        Some(cf) => (strip_closed_form(&p), None, cf.to_json()),
        None => (strip_closed_form(&p), None, Value::Null),
    };
    Ok((
        json!({
            "command": "colimit",
            "input": path,
            "presentation": main,
            "defining_presentation": defining,
            "closed_form": closed,
        }),
        0,
    ))
}

/// Presentation JSON without the embedded closed form (reported separately).
fn strip_closed_form(p: &corrlim::colimit::Presentation) -> Value {
    let mut v = p.to_json();
    if let Some(obj) = v.as_object_mut() {
        obj.insert("closed_form".into(), Value::Null);
    }
    v
}

pub fn cmd_recognize(path: &str, opts: &Options) -> CmdResult {
    let lowered = load(path, opts)?;
    let cf = recognize_closed_form(&lowered.diagram).map_err(|e| e.to_string())?;
    let closed = match &cf {
        Some(ClosedForm::BrownMcClanahan { m, n, notes, .. }) => json!({
            "name": "universal_unitary_matrix",
            "m": m,
            "n": n,
            "notes": notes,
        }),
        Some(other) => other.to_json(),
        None => Value::Null,
    };
    Ok((
        json!({
            "command": "recognize",
            "input": path,
            "closed_form": closed,
        }),
        0,
    ))
}

pub fn cmd_eval(path: &str, opts: &Options) -> CmdResult {
    let lowered = load(path, opts)?;
    let f = &lowered.diagram;
    let out = match &f.shape {
        Shape::Discrete(_) => {
            let d = eval_direct_sum(f).map_err(|e| e.to_string())?;
            json!({
                "command": "eval",
                "input": path,
                "kind": "direct_sum",
                "blocks": d.blocks().to_vec(),
            })
        }
        Shape::FiniteGroup(_) => {
            let eval = eval_fell_bundle(f, opts.tol.max(1e-8), opts.seed)
                .map_err(|e| e.to_string())?;
            json!({
                "command": "eval",
                "input": path,
                "kind": "fell_bundle_section_algebra",
                "blocks": eval.algebra.blocks().to_vec(),
                "iso_defect": jnum(eval.iso_defect),
                "certificate": {
                    "convolution_dim": eval.conv.algebra.dim,
                    "fibre_dims": eval.conv.fibre_dims,
                },
            })
        }
        Shape::ChainPrefix { .. } => {
            let eval = eval_stabilized_chain(f).map_err(|e| e.to_string())?;
            json!({
                "command": "eval",
                "input": path,
                "kind": "inductive_chain",
                "evaluable": eval.evaluable,
                "blocks": eval.algebra.as_ref().map(|a| a.blocks().to_vec()),
                "bratteli": eval.bratteli,
            })
        }
        other => return Err(format!("no concrete evaluation for shape {other:?}")),
    };
    Ok((out, 0))
}

pub fn cmd_repcheck(pres_path: &str, assign_path: &str, opts: &Options) -> CmdResult {
    let pres_text = std::fs::read_to_string(pres_path)
        .map_err(|e| format!("cannot read {pres_path}: {e}"))?;
    let pres_json: Value =
        serde_json::from_str(&pres_text).map_err(|e| format!("bad presentation JSON: {e}"))?;
    // Accept either a bare presentation or a colimit report.
    let pres_value = pres_json.get("presentation").unwrap_or(&pres_json);
    let p = corrlim::colimit::Presentation::from_json(pres_value).map_err(|e| e.to_string())?;
    let assign_text = std::fs::read_to_string(assign_path)
        .map_err(|e| format!("cannot read {assign_path}: {e}"))?;
    let assign_json: Value =
        serde_json::from_str(&assign_text).map_err(|e| format!("bad assignment JSON: {e}"))?;
    let mut r =
        RepAssignment::from_json(&assign_json, p.generators.len()).map_err(|e| e.to_string())?;
    if assign_json.get("tol").is_none() {
        r.tol = opts.tol;
    }
    let report = check_representation(&p, &r).map_err(|e| e.to_string())?;
    let code = i32::from(!report.passed());
    Ok((
        json!({
            "command": "repcheck",
            "presentation": pres_path,
            "assignment": assign_path,
            "report": report.to_json(),
        }),
        code,
    ))
}

pub fn cmd_validate_cone(path: &str, name: &str, opts: &Options) -> CmdResult {
    let lowered = load(path, opts)?;
    let cone = lowered
        .cones
        .get(name)
        .or_else(|| lowered.transformations.get(name))
        .ok_or_else(|| format!("no cone or transformation named {name} in {path}"))?;
    let report = validate_transformation(cone, opts.tol).map_err(|e| e.to_string())?;
    let code = i32::from(!report.passed());
    Ok((
        json!({
            "command": "validate-cone",
            "input": path,
            "name": name,
            "gamma_dims": cone.gammas.iter().map(|g| g.dim()).collect::<Vec<_>>(),
            "report": report.to_json(),
        }),
        code,
    ))
}

pub fn cmd_compose(path: &str, first: &str, second: &str, opts: &Options) -> CmdResult {
    let lowered = load(path, opts)?;
    let pick = |name: &str| -> Result<corrlim::transform::Transformation, String> {
        lowered
            .transformations
            .get(name)
            .or_else(|| lowered.cones.get(name))
            .cloned()
            .ok_or_else(|| format!("no transformation named {name} in {path}"))
    };
    let t1 = pick(first)?;
    let t2 = pick(second)?;
    let composite = compose_transformations(&t1, &t2).map_err(|e| e.to_string())?;
    let report = validate_transformation(&composite, opts.tol).map_err(|e| e.to_string())?;
    let code = i32::from(!report.passed());
    Ok((
        json!({
            "command": "compose",
            "input": path,
            "first": first,
            "second": second,
            "gamma_dims": composite.gammas.iter().map(|g| g.dim()).collect::<Vec<_>>(),
            "report": report.to_json(),
        }),
        code,
    ))
}
