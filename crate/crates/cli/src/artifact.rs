//! CSV artifacts, written atomically: the rows go to a temporary file in
//! the target directory which is renamed into place only after a clean
//! flush. An error at any point removes the temporary and leaves the
//! target untouched, so downstream tooling never sees a partial file.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::CliError;

pub fn write_csv<I>(path: &Path, header: &str, rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = String>,
{
    let file_name = path
        .file_name()
        .ok_or_else(|| CliError::Runtime(format!("'{}' is not a file path", path.display())))?;
    let tmp = path.with_file_name(format!(
        "{}.tmp.{}",
        file_name.to_string_lossy(),
        std::process::id()
    ));

    let written = (|| -> std::io::Result<()> {
        let mut w = std::io::BufWriter::new(fs::File::create(&tmp)?);
        writeln!(w, "{header}")?;
        for row in rows {
            writeln!(w, "{row}")?;
        }
        w.flush()
    })();

    let finished = written.and_then(|()| fs::rename(&tmp, path));
    if let Err(e) = finished {
        let _ = fs::remove_file(&tmp);
        return Err(CliError::Runtime(format!(
            "cannot write '{}': {e}",
            path.display()
        )));
    }
    Ok(())
}
