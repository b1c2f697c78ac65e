use std::path::Path;
use std::process::Command;

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    for file in [".git/HEAD", ".git/index"] {
        let path = root.join(file);
        if path.exists() {
            println!("cargo:rerun-if-changed={}", path.display());
        }
    }
    println!("cargo:rerun-if-env-changed=STEM_GIT_DESCRIBE");

    let describe = std::env::var("STEM_GIT_DESCRIBE").ok().or_else(|| {
        let out = Command::new("git")
            .args(["describe", "--always", "--tags", "--dirty"])
            .current_dir(&root)
            .output()
            .ok()?;
        out.status.success().then(|| String::from_utf8_lossy(&out.stdout).trim().to_string())
    });
    println!("cargo:rustc-env=STEM_GIT_DESCRIBE={}", describe.unwrap_or_else(|| "unknown".into()));
}
