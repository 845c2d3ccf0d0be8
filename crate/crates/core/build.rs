use std::process::Command;

fn git(args: &[&str]) -> Option<String> {
    let out = Command::new("git").args(args).output().ok()?;
    if !out.status.success() {
        return None;
    }
    let s = String::from_utf8(out.stdout).ok()?.trim().to_string();
    (!s.is_empty()).then_some(s)
}

fn main() {
    let pkg = env!("CARGO_PKG_VERSION");
    let version = git(&["describe", "--tags", "--dirty"])
        .or_else(|| git(&["describe", "--always", "--dirty"]).map(|d| format!("v{pkg}-g{d}")))
        .unwrap_or_else(|| format!("v{pkg}"));
    println!("cargo:rustc-env=SWIPT_MEC_VERSION={version}");
    println!("cargo:rerun-if-changed=build.rs");
    for path in ["../../.git/HEAD", "../../.git/index"] {
        if std::path::Path::new(path).exists() {
            println!("cargo:rerun-if-changed={path}");
        }
    }
}
