//! Drives the same runner the binary uses: layered settings, CSV outputs,
//! and a rerun from the written manifest.

use gplincc::runner::{rerun_manifest, run, Settings};

fn main() -> gplincc::Result<()> {
    let out = std::env::temp_dir().join("gplincc-cli-settings");
    let mut s = Settings::default();
    s.apply_text("command = example\nexample = 1\nk = 50\n")?;
    s.set("out", out.to_string_lossy())?;
    let report = run(&s)?;
    println!("wrote {} files to {}", report.files.len(), report.out.display());

    let again = rerun_manifest(&out.join("manifest.txt"), &out.join("again"))?;
    for f in report.files.iter().filter(|f| f.ends_with(".csv")) {
        let same = std::fs::read(out.join(f)).ok() == std::fs::read(again.out.join(f)).ok();
        println!("{f:24} {}", if same { "identical" } else { "DIFFERS" });
    }
    Ok(())
}
