use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{
    estimate_order, run_moment_study, run_positivity_study, run_strong_error_study, Executor, ExperimentConfig,
    MomentReport, OrderEstimate, PositivityReport, StrongErrorStudy, StudyError,
};
use crate::schemes::format_sig17;

/// File names written by [`write_artifacts`], envelope first.
pub const ARTIFACT_FILES: [&str; 4] = ["result.json", "strong_error.csv", "positivity.csv", "moments.csv"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderSummary {
    pub estimate: Option<OrderEstimate>,
    pub note: Option<String>,
}

/// Everything a run produced, plus what is needed to reproduce it.
///
/// Carries no wall-clock time: identical configurations serialize to
/// identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub completed: bool,
    pub version: String,
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub seed: u64,
    pub strong_error: Option<StrongErrorStudy>,
    pub order: Option<OrderSummary>,
    pub positivity: Option<Vec<PositivityReport>>,
    pub moments: Option<Vec<MomentReport>>,
}

pub fn version_string() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

pub fn run_experiment(cfg: &ExperimentConfig, exec: &Executor) -> Result<ExperimentResult, StudyError> {
    cfg.validate()?;
    let strong_error = cfg
        .convergence
        .then(|| run_strong_error_study(cfg, exec))
        .transpose()?;
    let order = strong_error.as_ref().map(|s| match estimate_order(&s.rows) {
        Ok(est) => OrderSummary {
            estimate: Some(est),
            note: None,
        },
        Err(e) => OrderSummary {
            estimate: None,
            note: Some(e.to_string()),
        },
    });
    let positivity = cfg
        .positivity
        .then(|| run_positivity_study(cfg, exec))
        .transpose()?;
    let moments = cfg.moments.then(|| run_moment_study(cfg, exec)).transpose()?;

    Ok(ExperimentResult {
        completed: true,
        version: version_string(),
        config: cfg.clone(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        strong_error,
        order,
        positivity,
        moments,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

fn envelope_bytes(result: &ExperimentResult, completed: bool) -> Vec<u8> {
    let mut envelope = result.clone();
    envelope.completed = completed;
    let mut bytes = serde_json::to_vec_pretty(&envelope).expect("result serializes");
    bytes.push(b'\n');
    bytes
}

pub fn strong_error_csv(study: &StrongErrorStudy) -> String {
    let mut out = String::from("delta,mse,std_error,n_paths,n_diverged\n");
    for r in &study.rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            format_sig17(r.delta),
            format_sig17(r.mse),
            format_sig17(r.std_error),
            r.n_paths,
            r.n_diverged
        ));
    }
    out
}

pub fn positivity_csv(reports: &[PositivityReport]) -> String {
    let mut out = String::from("scheme,delta,n_paths,n_violations,min_coordinate\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.scheme,
            format_sig17(r.delta),
            r.n_paths,
            r.n_paths_with_violation,
            format_sig17(r.min_coordinate)
        ));
    }
    out
}

pub fn moments_csv(reports: &[MomentReport]) -> String {
    let mut out = String::from("scheme,delta,p,estimate,std_error,unbounded_flag\n");
    for rep in reports {
        for r in &rep.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                rep.scheme,
                format_sig17(r.delta),
                format_sig17(rep.p),
                format_sig17(r.estimate),
                format_sig17(r.std_error),
                r.unbounded
            ));
        }
    }
    out
}

/// Writes the JSON envelope (marked incomplete), then each study's CSV, then
/// rewrites the envelope with `"completed": true`. Returns the files written.
pub fn write_artifacts(result: &ExperimentResult, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let envelope = dir.join(ARTIFACT_FILES[0]);
    write_file(&envelope, &envelope_bytes(result, false))?;

    let mut written = vec![envelope.clone()];
    let mut emit = |name: &str, body: String| -> io::Result<()> {
        let path = dir.join(name);
        let mut f = fs::File::create(&path)?;
        f.write_all(body.as_bytes())?;
        f.sync_all()?;
        written.push(path);
        Ok(())
    };
    if let Some(study) = &result.strong_error {
        emit(ARTIFACT_FILES[1], strong_error_csv(study))?;
    }
    if let Some(reports) = &result.positivity {
        emit(ARTIFACT_FILES[2], positivity_csv(reports))?;
    }
    if let Some(reports) = &result.moments {
        emit(ARTIFACT_FILES[3], moments_csv(reports))?;
    }

    write_file(&envelope, &envelope_bytes(result, result.completed))?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disabled_studies_leave_provenance_only() {
        let cfg = ExperimentConfig {
            seed: 99,
            ..Default::default()
        };
        let result = run_experiment(&cfg, &Executor::new(1).unwrap()).unwrap();
        assert!(result.strong_error.is_none() && result.positivity.is_none() && result.moments.is_none());
        assert!(result.order.is_none());
        assert_eq!(result.seed, 99);
        assert_eq!(result.config_hash, cfg.hash());
        assert!(result.version.starts_with('v'));

        let dir = tempfile::tempdir().unwrap();
        let files = write_artifacts(&result, dir.path()).unwrap();
        assert_eq!(files.len(), 1);
        let json: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.path().join("result.json")).unwrap()).unwrap();
        assert_eq!(json["completed"], true);
        assert_eq!(json["config"]["seed"], 99);
    }

    #[test]
    fn csv_layouts() {
        let cfg = ExperimentConfig {
            dim: 1,
            x0: vec![0.4],
            fine_steps: 64,
            levels: vec![2, 4, 8],
            paths: 8,
            positivity_steps: 8,
            seed: 3,
            convergence: true,
            positivity: true,
            moments: true,
            ..Default::default()
        };
        let result = run_experiment(&cfg, &Executor::new(2).unwrap()).unwrap();
        let strong = strong_error_csv(result.strong_error.as_ref().unwrap());
        let lines: Vec<&str> = strong.lines().collect();
        assert_eq!(lines[0], "delta,mse,std_error,n_paths,n_diverged");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("1.2500000000000000e-1,"));
        assert!(lines[1].ends_with(",8,0"));

        let pos = positivity_csv(result.positivity.as_ref().unwrap());
        assert_eq!(pos.lines().next().unwrap(), "scheme,delta,n_paths,n_violations,min_coordinate");
        assert_eq!(pos.lines().count(), 4);
        assert!(pos.lines().nth(1).unwrap().starts_with("semidiscrete,1.2500000000000000e-1,8,0,"));

        let mom = moments_csv(result.moments.as_ref().unwrap());
        assert_eq!(mom.lines().next().unwrap(), "scheme,delta,p,estimate,std_error,unbounded_flag");
        assert_eq!(mom.lines().count(), 1 + 3 * 3);
        assert!(mom.lines().nth(1).unwrap().starts_with("semidiscrete,1.2500000000000000e-1,3.0000000000000000e0,"));
        assert!(mom.lines().nth(1).unwrap().ends_with(",false"));
        assert!(result.order.as_ref().unwrap().estimate.is_some());
    }

    #[test]
    fn order_failure_is_noted_not_fatal() {
        let cfg = ExperimentConfig {
            dim: 1,
            x0: vec![0.4],
            fine_steps: 16,
            levels: vec![2],
            paths: 4,
            seed: 1,
            convergence: true,
            ..Default::default()
        };
        let result = run_experiment(&cfg, &Executor::new(1).unwrap()).unwrap();
        let order = result.order.unwrap();
        assert!(order.estimate.is_none());
        assert!(order.note.unwrap().contains("at least 3"));
    }
}
