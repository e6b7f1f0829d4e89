use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::Context;
use valuescope_core::config::{
    BackendOverrides, FileConfig, StageBackends, DEFAULT_LISTEN, DEFAULT_MAX_FAILURE_RATE,
    DEFAULT_PARALLELISM, DEFAULT_SAMPLE_SEED,
};
use valuescope_core::orchestrator::load_theory_file;
use valuescope_core::{TemplateSet, ValueTheory};

use crate::{usage, GlobalArgs};

/// Everything a command needs, merged from defaults, the config file, the
/// environment and flags, in increasing order of precedence.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub backends: StageBackends,
    pub theories_dir: PathBuf,
    pub results_dir: PathBuf,
    pub templates: TemplateSet,
    pub documents: BTreeMap<String, PathBuf>,
    pub sample_size: Option<usize>,
    pub sample_seed: u64,
    pub parallelism: usize,
    pub service_parallelism: usize,
    pub max_failure_rate: f64,
    pub listen: String,
    pub poll_interval: Option<Duration>,
}

impl GlobalArgs {
    fn overrides(&self) -> BackendOverrides {
        BackendOverrides {
            flavor: self.flavor,
            base_url: self.backend_url.clone(),
            model_name: self.model.clone(),
            temperature: self.temperature,
            seed: self.seed,
            ..BackendOverrides::default()
        }
    }
}

impl RunConfig {
    pub fn resolve(global: &GlobalArgs) -> anyhow::Result<Self> {
        let file = match &global.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let env = BackendOverrides::from_env(|name| std::env::var(name).ok())?;
        Self::from_sources(&file, &env, global)
    }

    pub fn from_sources(file: &FileConfig, env: &BackendOverrides, global: &GlobalArgs) -> anyhow::Result<Self> {
        let backends = StageBackends::resolve(file, &[env, &global.overrides()]);
        let theories_dir = file.paths.theories.clone().unwrap_or_else(|| PathBuf::from("theories"));
        let results_dir = file.paths.results.clone().unwrap_or_else(|| PathBuf::from("results"));
        let templates = match global.templates.as_ref().or(file.paths.templates.as_ref()) {
            Some(dir) => TemplateSet::load_dir(dir)
                .with_context(|| format!("loading templates from {}", dir.display()))?,
            None => TemplateSet::builtin(),
        };
        let parallelism = global
            .parallelism
            .or(file.evaluation.parallelism)
            .unwrap_or(DEFAULT_PARALLELISM);
        let service_parallelism = global
            .parallelism
            .or(file.service.parallelism)
            .unwrap_or(DEFAULT_PARALLELISM);
        if parallelism == 0 || service_parallelism == 0 {
            return Err(usage("parallelism must be at least 1"));
        }
        Ok(Self {
            backends,
            theories_dir,
            results_dir,
            templates,
            documents: file.documents.clone(),
            sample_size: file.evaluation.sample_size,
            sample_seed: file.evaluation.sample_seed.unwrap_or(DEFAULT_SAMPLE_SEED),
            parallelism,
            service_parallelism,
            max_failure_rate: file.evaluation.max_failure_rate.unwrap_or(DEFAULT_MAX_FAILURE_RATE),
            listen: file.service.listen.clone().unwrap_or_else(|| DEFAULT_LISTEN.to_string()),
            poll_interval: file
                .service
                .poll_interval_secs
                .filter(|s| *s > 0)
                .map(Duration::from_secs),
        })
    }

    /// `reference` is either a theory file or the id of a theory in the
    /// theories directory.
    pub fn load_theory(&self, reference: &str) -> anyhow::Result<ValueTheory> {
        let as_path = Path::new(reference);
        let path = if as_path.is_file() {
            as_path.to_path_buf()
        } else {
            let in_store = self.theories_dir.join(format!("{reference}.json"));
            if !in_store.is_file() {
                return Err(usage(format!(
                    "theory {reference:?} is neither a file nor present in {}",
                    self.theories_dir.display()
                )));
            }
            in_store
        };
        load_theory_file(&path).map_err(anyhow::Error::msg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use valuescope_core::Flavor;

    fn file(text: &str) -> FileConfig {
        FileConfig::parse(text, "test", Path::new("/cfg")).unwrap()
    }

    #[test]
    fn defaults_when_nothing_is_set() {
        let cfg = RunConfig::from_sources(&FileConfig::default(), &BackendOverrides::default(), &GlobalArgs::default()).unwrap();
        assert_eq!(cfg.backends.detect.temperature, 0.0);
        assert_eq!(cfg.backends.detect.seed, 42);
        assert_eq!(cfg.sample_seed, 42);
        assert_eq!(cfg.parallelism, DEFAULT_PARALLELISM);
        assert_eq!(cfg.listen, DEFAULT_LISTEN);
        assert_eq!(cfg.poll_interval, None);
    }

    #[test]
    fn flag_beats_env_beats_file() {
        let f = file("[backend]\nmodel_name = \"from-file\"\n");
        let env = BackendOverrides {
            model_name: Some("from-env".into()),
            ..Default::default()
        };
        let flags = GlobalArgs {
            model: Some("from-flag".into()),
            ..Default::default()
        };
        let none = GlobalArgs::default();
        let empty_env = BackendOverrides::default();

        let pick = |f: &FileConfig, e: &BackendOverrides, g: &GlobalArgs| {
            RunConfig::from_sources(f, e, g).unwrap().backends.rate.model_name
        };
        assert_eq!(pick(&f, &env, &flags), "from-flag");
        assert_eq!(pick(&f, &env, &none), "from-env");
        assert_eq!(pick(&f, &empty_env, &none), "from-file");
        assert_eq!(pick(&FileConfig::default(), &empty_env, &flags), "from-flag");
    }

    #[test]
    fn per_stage_file_sections_stay_below_flags() {
        let f = file("[backends.detect]\nflavor = \"scripted\"\nscript = \"d.json\"\ntemperature = 0.3\n");
        let flags = GlobalArgs {
            temperature: Some(0.9),
            ..Default::default()
        };
        let cfg = RunConfig::from_sources(&f, &BackendOverrides::default(), &flags).unwrap();
        assert_eq!(cfg.backends.detect.flavor, Flavor::Scripted);
        assert_eq!(cfg.backends.detect.script.as_deref(), Some(Path::new("/cfg/d.json")));
        assert_eq!(cfg.backends.detect.temperature, 0.9);
        assert_eq!(cfg.backends.conceptualise.flavor, Flavor::OllamaNative);
    }

    #[test]
    fn zero_parallelism_is_a_usage_error() {
        let flags = GlobalArgs {
            parallelism: Some(0),
            ..Default::default()
        };
        let err = RunConfig::from_sources(&FileConfig::default(), &BackendOverrides::default(), &flags).unwrap_err();
        assert!(err.is::<crate::UsageError>());
    }
}
