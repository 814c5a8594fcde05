//! Run manifests: every output file a command writes is listed in a
//! `manifest.json` next to it, together with the scenario hash, parameters,
//! and tool version. Timestamps honor `SOURCE_DATE_EPOCH` so test harnesses
//! can demand byte-identical reruns.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use effham_core::jsonio;
use effham_core::Result;
use serde_json::{json, Value};

pub fn tool_version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

pub fn git_describe() -> &'static str {
    env!("EFFHAM_GIT_DESCRIBE")
}

fn unix_now() -> u64 {
    if let Ok(v) = std::env::var("SOURCE_DATE_EPOCH") {
        if let Ok(secs) = v.parse::<u64>() {
            return secs;
        }
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// UTC ISO-8601 without external date crates.
pub fn timestamp() -> String {
    let secs = unix_now();
    let days = (secs / 86_400) as i64;
    let rem = secs % 86_400;
    let (h, m, s) = (rem / 3600, (rem % 3600) / 60, rem % 60);
    // civil-from-days (Howard Hinnant's algorithm)
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let month = if mp < 10 { mp + 3 } else { mp - 9 };
    let year = if month <= 2 { y + 1 } else { y };
    format!("{year:04}-{month:02}-{d:02}T{h:02}:{m:02}:{s:02}Z")
}

pub fn command_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

pub fn write_manifest(
    dir: &Path,
    scenario_hash: &str,
    params: Value,
    outputs: &[String],
) -> Result<()> {
    let value = json!({
        "schema": "effham.manifest.v1",
        "command_line": command_line(),
        "scenario_hash": scenario_hash,
        "parameters": params,
        "tool_version": tool_version(),
        "git_describe": git_describe(),
        "timestamp": timestamp(),
        "outputs": outputs,
    });
    std::fs::write(dir.join("manifest.json"), jsonio::render(&value))?;
    Ok(())
}
