//! External preprocessor commands.
//!
//! A template is split shell-style. If it mentions any of `{in}`, `{out}`,
//! `{width}`, `{height}` those are substituted; otherwise the four values are
//! appended in that order, giving `CMD <in.yuv> <out.yuv> <width> <height>`.

use std::path::Path;
use std::process::Command;

use super::tools::run;
use crate::error::{Error, Result};
use crate::yuv::Geometry;

const PLACEHOLDERS: [&str; 4] = ["{in}", "{out}", "{width}", "{height}"];

pub fn preprocessor_argv(
    template: &str,
    input: &Path,
    output: &Path,
    g: Geometry,
) -> Result<Vec<String>> {
    let words = shlex::split(template)
        .filter(|w| !w.is_empty())
        .ok_or_else(|| Error::Config(format!("cannot parse preprocessor command: {template}")))?;
    let values = [
        input.display().to_string(),
        output.display().to_string(),
        g.width.to_string(),
        g.height.to_string(),
    ];
    let templated = words
        .iter()
        .any(|w| PLACEHOLDERS.iter().any(|p| w.contains(p)));
    if !templated {
        return Ok(words.into_iter().chain(values).collect());
    }
    Ok(words
        .into_iter()
        .map(|w| {
            PLACEHOLDERS
                .iter()
                .zip(&values)
                .fold(w, |acc, (p, v)| acc.replace(p, v))
        })
        .collect())
}

/// Runs the preprocessor once and checks that it kept the geometry.
pub fn run_preprocessor(template: &str, input: &Path, output: &Path, g: Geometry) -> Result<()> {
    let argv = preprocessor_argv(template, input, output, g)?;
    run(Command::new(&argv[0]).args(&argv[1..]), "preprocessor")?;
    let in_len = file_len(input)?;
    let out_len = std::fs::metadata(output)
        .map_err(|_| Error::Geometry {
            path: output.to_path_buf(),
            message: "preprocessor exited 0 but wrote no output".into(),
        })?
        .len();
    if in_len != out_len {
        return Err(Error::Geometry {
            path: output.to_path_buf(),
            message: format!(
                "preprocessor changed the stream size from {in_len} to {out_len} bytes; \
                 a pre-encoder must keep {g} and the frame count"
            ),
        });
    }
    Ok(())
}

fn file_len(p: &Path) -> Result<u64> {
    Ok(std::fs::metadata(p)
        .map_err(|e| Error::io(format!("stat {}", p.display()), e))?
        .len())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g() -> Geometry {
        Geometry::new(64, 32).unwrap()
    }

    #[test]
    fn appends_contract_arguments() {
        let a = preprocessor_argv(
            "my-filter --strength 2",
            Path::new("a.yuv"),
            Path::new("b.yuv"),
            g(),
        )
        .unwrap();
        assert_eq!(
            a,
            ["my-filter", "--strength", "2", "a.yuv", "b.yuv", "64", "32"]
        );
    }

    #[test]
    fn substitutes_placeholders() {
        let a = preprocessor_argv(
            "ffmpeg -s {width}x{height} -i {in} -vf 'unsharp' {out}",
            Path::new("/x/a b.yuv"),
            Path::new("o.yuv"),
            g(),
        )
        .unwrap();
        assert_eq!(
            a,
            [
                "ffmpeg",
                "-s",
                "64x32",
                "-i",
                "/x/a b.yuv",
                "-vf",
                "unsharp",
                "o.yuv"
            ]
        );
    }

    #[test]
    fn rejects_unbalanced_quotes() {
        assert!(preprocessor_argv("cmd 'oops", Path::new("a"), Path::new("b"), g()).is_err());
        assert!(preprocessor_argv("", Path::new("a"), Path::new("b"), g()).is_err());
    }

    #[test]
    fn identity_copy_passes_and_truncation_fails() {
        let dir = tempfile::tempdir().unwrap();
        let inp = dir.path().join("in.yuv");
        let out = dir.path().join("out.yuv");
        std::fs::write(&inp, vec![7u8; 64 * 32 * 3 / 2]).unwrap();
        run_preprocessor("cp {in} {out}", &inp, &out, g()).unwrap();
        assert_eq!(std::fs::read(&inp).unwrap(), std::fs::read(&out).unwrap());

        let err = run_preprocessor(
            "sh -c 'head -c 100 \"$0\" > \"$1\"' {in} {out}",
            &inp,
            &out,
            g(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Geometry { .. }), "{err}");

        let err = run_preprocessor("false", &inp, &out, g()).unwrap_err();
        assert!(matches!(err, Error::Tool { .. }), "{err}");
    }
}
