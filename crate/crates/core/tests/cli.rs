use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command;

fn legup() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_legup"));
    c.env("RUST_LOG", "warn").env_remove("LEGUP_OUTPUT_DIR");
    c
}

fn write_data(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("ratings.csv");
    let mut f = fs::File::create(&path).unwrap();
    for u in 0..30 {
        for i in 0..20 {
            if (u * 5 + i * 3) % 4 < 2 {
                writeln!(f, "u{u},i{i},{}", 1 + (u * i) % 5).unwrap();
            }
        }
    }
    path
}

fn write_config(dir: &Path, data: &Path, victim: &str) -> std::path::PathBuf {
    let path = dir.join("grid.toml");
    let text = format!(
        "seed = 2\nparallelism = 1\noutput_dir = {:?}\nk = 5\n[dataset]\npath = {:?}\n[budget]\nattack_size = 5\nprofile_size = 4\nnum_targets = 1\n[[attackers]]\nkind = \"average\"\n[[attackers]]\nkind = \"segment\"\n{victim}\n",
        dir.join("from-file").display().to_string(),
        data.display().to_string()
    );
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn exit_codes_and_output_override() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_data(tmp.path());
    let good = write_config(tmp.path(), &data, "[[victims]]\nkind = \"svd\"\nepochs = 3");

    let v = legup().arg("validate").arg(&good).output().unwrap();
    assert_eq!(v.status.code(), Some(0));
    assert!(String::from_utf8(v.stdout).unwrap().contains("cells     2"));
    fs::write(tmp.path().join("bad.toml"), "[[attackers]]\nkind = \"dcgan\"\n").unwrap();
    let bad = legup().arg("validate").arg(tmp.path().join("bad.toml")).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("unsupported (out of scope)"));

    let out_dir = tmp.path().join("from-env");
    let run = legup().arg("run").arg(&good).env("LEGUP_OUTPUT_DIR", &out_dir).status().unwrap();
    assert_eq!(run.code(), Some(0));
    assert!(out_dir.join("report.csv").is_file());
    assert!(!tmp.path().join("from-file").exists());

    let failing = write_config(
        tmp.path(),
        &data,
        "[[victims]]\nkind = \"svd\"\ndim = 0\n[[victims]]\nkind = \"slopeone\"",
    );
    let run = legup().arg("run").arg(&failing).output().unwrap();
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&run.stderr).contains("svd"));
    assert_eq!(
        fs::read_to_string(tmp.path().join("from-file/report.csv")).unwrap().lines().count(),
        1 + 2
    );

    let s = legup().arg("summarize").arg(tmp.path()).output().unwrap();
    assert_eq!(s.status.code(), Some(0));
    let text = String::from_utf8(s.stdout).unwrap();
    assert!(text.contains("average") && text.contains("segment"), "{text}");
}

#[test]
fn detect_and_project_with_injected_fakes() {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_data(tmp.path());
    let fakes = tmp.path().join("fakes.csv");
    let mut f = fs::File::create(&fakes).unwrap();
    writeln!(f, "user_id,item_id,rating").unwrap();
    for k in 0..4 {
        for i in 0..20 {
            writeln!(f, "fake-x-{k},i{i},{}", if i == 3 { 5 } else { 3 }).unwrap();
        }
    }
    drop(f);

    let d = legup()
        .args(["detect", "--m", "4", "--k", "2", "--inject"])
        .arg(&fakes)
        .arg(&data)
        .output()
        .unwrap();
    assert_eq!(d.status.code(), Some(0), "{}", String::from_utf8_lossy(&d.stderr));
    assert_eq!(String::from_utf8(d.stdout).unwrap().lines().count(), 4);
    assert!(String::from_utf8_lossy(&d.stderr).contains("precision"));

    let out = tmp.path().join("proj.csv");
    let p = legup()
        .arg("project")
        .arg(&data)
        .arg("--out")
        .arg(&out)
        .arg("--inject")
        .arg(&fakes)
        .status()
        .unwrap();
    assert_eq!(p.code(), Some(0));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "user_id,x,y,is_fake");
    assert_eq!(lines.len(), 1 + 30 + 4);
    assert_eq!(lines.iter().filter(|l| l.ends_with(",1")).count(), 4);

    let missing = legup()
        .args(["detect", "--m", "2"])
        .arg(tmp.path().join("none.csv"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("none.csv does not exist"));
}
