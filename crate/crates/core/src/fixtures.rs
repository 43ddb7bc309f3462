//! Deterministic fixture projects for benchmarks, simulations, and tests.

use std::path::Path;

/// Write a project with `modules` source files plus `manifest.toml` under
/// `dir`. Content is a pure function of the arguments, so packing a fixture
/// twice yields byte-identical artifacts.
pub fn write_fixture_project(
    dir: &Path,
    namespace: &str,
    name: &str,
    version: &str,
    modules: usize,
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir.join("src"))?;
    let manifest = format!(
        "[package]\nname = \"{name}\"\nversion = \"{version}\"\nnamespace = \"{namespace}\"\n"
    );
    std::fs::write(dir.join("manifest.toml"), manifest)?;
    for index in 1..=modules {
        std::fs::write(
            dir.join(format!("src/module_{index:02}.src")),
            module_body(name, index),
        )?;
    }
    Ok(())
}

fn module_body(name: &str, index: usize) -> String {
    format!(
        "module {name}_{index:02}\n\
         input  record {{ text: string }}\n\
         output record {{ text: string, step: int }}\n\
         run {{\n\
           let step = {index}\n\
           emit {{ text: input.text, step: step }}\n\
         }}\n"
    )
}

/// Total bytes of the files a fixture project packs.
pub fn project_source_size(dir: &Path) -> std::io::Result<u64> {
    let mut total = 0;
    for entry in walkdir::WalkDir::new(dir) {
        let entry = entry.map_err(|e| std::io::Error::other(e.to_string()))?;
        if entry.file_type().is_file() {
            total += entry.metadata().map_err(|e| std::io::Error::other(e.to_string()))?.len();
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_is_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        write_fixture_project(a.path(), "@demo", "fix", "1.0.0", 4).unwrap();
        write_fixture_project(b.path(), "@demo", "fix", "1.0.0", 4).unwrap();
        let read = |dir: &Path| {
            let mut files: Vec<(String, Vec<u8>)> = walkdir::WalkDir::new(dir)
                .into_iter()
                .filter_map(|e| e.ok())
                .filter(|e| e.file_type().is_file())
                .map(|e| {
                    (
                        e.path().strip_prefix(dir).unwrap().to_string_lossy().into_owned(),
                        std::fs::read(e.path()).unwrap(),
                    )
                })
                .collect();
            files.sort();
            files
        };
        assert_eq!(read(a.path()), read(b.path()));
    }

    #[test]
    fn module_count_scales_source_size() {
        let small = tempfile::tempdir().unwrap();
        let large = tempfile::tempdir().unwrap();
        write_fixture_project(small.path(), "@demo", "fix", "1.0.0", 1).unwrap();
        write_fixture_project(large.path(), "@demo", "fix", "1.0.0", 12).unwrap();
        assert!(project_source_size(large.path()).unwrap() > 4 * project_source_size(small.path()).unwrap());
    }
}
