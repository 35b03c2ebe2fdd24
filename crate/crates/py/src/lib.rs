//! Python bindings: predicate parsing, templates, macro-F1 and the CLI.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use folk_core::eval;
use folk_core::fol;
use folk_core::prompt::{TemplateKind, TemplateSet};
use folk_core::transport::UreqTransport;
use folk_core::Label;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn label(raw: &str) -> PyResult<Label> {
    match raw.trim().to_ascii_uppercase().as_str() {
        "SUPPORTED" => Ok(Label::Supported),
        "NOT_SUPPORTED" => Ok(Label::NotSupported),
        "UNKNOWN" => Ok(Label::Unknown),
        _ => Err(value_error(format!("unknown label `{raw}`"))),
    }
}

fn template_kind(name: &str) -> PyResult<TemplateKind> {
    TemplateKind::ALL
        .into_iter()
        .find(|k| k.file_stem() == name)
        .ok_or_else(|| value_error(format!("unknown template `{name}`")))
}

/// Parses one predicate line into a dict with name, args, description and
/// its normalized rendering.
#[pyfunction]
fn parse_predicate<'py>(py: Python<'py>, line: &str) -> PyResult<Bound<'py, PyDict>> {
    let p = fol::parse_predicate(line).map_err(value_error)?;
    let out = PyDict::new(py);
    out.set_item("name", &p.name)?;
    out.set_item("args", &p.args)?;
    out.set_item("description", &p.description)?;
    out.set_item("head", p.id().head())?;
    out.set_item("rendered", p.render())?;
    Ok(out)
}

/// Parses a decomposition block; returns the rendered predicates.
#[pyfunction]
fn parse_clause(block: &str) -> PyResult<Vec<String>> {
    let parsed = fol::parse_clause(block).map_err(value_error)?;
    Ok(parsed.clause.predicates().iter().map(|p| p.render()).collect())
}

#[pyfunction]
fn macro_f1(pred: Vec<String>, gold: Vec<String>) -> PyResult<f64> {
    let pred = pred.iter().map(|s| label(s)).collect::<PyResult<Vec<_>>>()?;
    let gold = gold.iter().map(|s| label(s)).collect::<PyResult<Vec<_>>>()?;
    eval::macro_f1(&pred, &gold).map_err(value_error)
}

#[pyfunction]
fn template_names() -> Vec<&'static str> {
    TemplateKind::ALL.iter().map(|k| k.file_stem()).collect()
}

#[pyfunction]
#[pyo3(signature = (name, claim, context = ""))]
fn render_template(name: &str, claim: &str, context: &str) -> PyResult<String> {
    Ok(TemplateSet::builtin().get(template_kind(name)?).render(claim, context))
}

/// Runs the command line with `args` (without the program name). Returns
/// `(exit_code, stdout, stderr)`. `env` defaults to the process environment.
#[pyfunction]
#[pyo3(signature = (args, env = None))]
fn run(py: Python<'_>, args: Vec<String>, env: Option<HashMap<String, String>>) -> (i32, String, String) {
    let env = env.unwrap_or_else(|| std::env::vars().collect());
    let mut argv = vec!["folk".to_string()];
    argv.extend(args);
    py.detach(|| {
        let transport = Arc::new(UreqTransport::new(Duration::from_secs(60)));
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = folk_cli::execute(&argv, &env, transport, &mut out, &mut err);
        (code, String::from_utf8_lossy(&out).into_owned(), String::from_utf8_lossy(&err).into_owned())
    })
}

#[pymodule]
fn folk(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(parse_predicate, m)?)?;
    m.add_function(wrap_pyfunction!(parse_clause, m)?)?;
    m.add_function(wrap_pyfunction!(macro_f1, m)?)?;
    m.add_function(wrap_pyfunction!(template_names, m)?)?;
    m.add_function(wrap_pyfunction!(render_template, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
