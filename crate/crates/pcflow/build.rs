use std::process::Command;

fn main() {
    let id = Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| format!("pcflow-{}", env!("CARGO_PKG_VERSION")));
    println!("cargo:rustc-env=PCFLOW_BUILD_ID={id}");
    println!("cargo:rerun-if-changed=build.rs");
}
