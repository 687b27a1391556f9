//! The `fracwave` binary: subcommands, outputs and exit codes.

use std::path::Path;
use std::process::{Command, Output};

fn fracwave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracwave"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn converge_writes_csv_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    std::fs::write(
        &cfg,
        "problem = custom-modal\nladder = 4, 8\nT = 0.5\nY = 2\nM = 3\n",
    )
    .unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = fracwave(&[
            "converge",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "5",
            "--threads",
            "2",
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read_to_string(out).unwrap()
    };
    let strip = |csv: String| {
        csv.lines()
            .map(|l| {
                let mut c: Vec<&str> = l.split(',').collect();
                c.remove(9);
                c.join(",")
            })
            .collect::<Vec<_>>()
    };
    let a = run("a.csv");
    assert!(a.starts_with("n,h_T,dt,K,Y,M,dofs_y,error,observed_rate,wall_time_ms,"));
    assert_eq!(strip(a), strip(run("b.csv")));
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    std::fs::write(&cfg, "s = 0.25\nn = 8\n").unwrap();
    let o = fracwave(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "-D",
        "n=4",
        "-D",
        "snapshots=0",
    ]);
    assert_eq!(code(&o), 0);
    // n = 4 gives three interior nodes.
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 4);
}

#[test]
fn exit_codes() {
    assert_eq!(code(&fracwave(&["converge", "-D", "s=1.5"])), 2);
    assert_eq!(code(&fracwave(&["converge", "-D", "nonsense=1"])), 2);
    assert_eq!(
        code(&fracwave(&[
            "converge",
            "--config",
            "/nonexistent/file.cfg"
        ])),
        4
    );
    let cfl = fracwave(&[
        "converge",
        "-D",
        "scheme=leapfrog",
        "-D",
        "s=0.75",
        "-D",
        "dt=0.5",
        "-D",
        "ladder=8",
    ]);
    assert_eq!(code(&cfl), 3);
    assert!(String::from_utf8_lossy(&cfl.stderr).contains("CFL"));
    let diverge = fracwave(&[
        "energy",
        "-D",
        "scheme=leapfrog",
        "-D",
        "n=8",
        "-D",
        "cfl_factor=1.1",
        "-D",
        "T=50",
    ]);
    assert_eq!(code(&diverge), 3);
}

#[test]
fn dump_matrices_writes_coordinate_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m");
    let o = fracwave(&["dump-matrices", "-D", "n=4", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    for f in [
        "mass_y.txt",
        "stiffness_y.txt",
        "mass_omega.txt",
        "stiffness_omega.txt",
    ] {
        let text = std::fs::read_to_string(Path::new(&out).join(f)).unwrap();
        assert!(text.lines().all(|l| l.split_whitespace().count() == 3));
    }
}
