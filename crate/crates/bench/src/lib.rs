//! Benchmark fixtures: the shipped programs, loaded once.

use std::path::{Path, PathBuf};

use mgale_core::pipeline::{AnalysisRequest, BENCH_SUITE};

pub fn programs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../programs")
}

/// `(name, request)` for every suite program present in `dir`.
pub fn suite(dir: &Path) -> Vec<(&'static str, AnalysisRequest)> {
    BENCH_SUITE
        .iter()
        .filter_map(|name| AnalysisRequest::from_file(&dir.join(format!("{name}.spp"))).ok().map(|r| (*name, r)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_suite_is_complete() {
        let names: Vec<&str> = suite(&programs_dir()).into_iter().map(|(n, _)| n).collect();
        assert_eq!(names, BENCH_SUITE);
    }
}
