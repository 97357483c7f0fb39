use std::fs;
use std::path::Path;

use dqcurate_eval::replay::write_replay_fixture;

const FIXTURE_SEED: u64 = 11;
const FILES: [&str; 3] = ["sarima.json", "pipeline.toml", "stream.csv"];

/// The committed replay fixture is exactly what the generator produces.
/// Set `DQCURATE_BLESS=1` to rewrite it.
#[test]
fn committed_fixture_matches_generator() {
    let committed = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/replay");
    if std::env::var_os("DQCURATE_BLESS").is_some() {
        write_replay_fixture(&committed, FIXTURE_SEED).unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    write_replay_fixture(dir.path(), FIXTURE_SEED).unwrap();
    for f in FILES {
        let want = fs::read(committed.join(f)).unwrap_or_else(|e| panic!("{f}: {e}"));
        assert_eq!(fs::read(dir.path().join(f)).unwrap(), want, "{f} drifted");
    }
}
