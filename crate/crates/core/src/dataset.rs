//! Segmented corpora tagged with the role they play in an experiment.
//!
//! Training only accepts a [`TrainSet`] and a [`ValidationSet`]; the
//! evaluation scenarios only accept a [`TestSet`]. Files are kept sorted by
//! project and file id.

use std::collections::BTreeMap;

use crate::bpe::SegmentedFile;
use crate::corpus::CorpusSplit;

macro_rules! role {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Default, PartialEq, Eq)]
        pub struct $name {
            files: Vec<SegmentedFile>,
        }

        impl $name {
            pub fn new(mut files: Vec<SegmentedFile>) -> Self {
                files.sort_by(|a, b| (&a.project_id, &a.file_id).cmp(&(&b.project_id, &b.file_id)));
                $name { files }
            }

            pub fn files(&self) -> &[SegmentedFile] {
                &self.files
            }

            pub fn is_empty(&self) -> bool {
                self.files.is_empty()
            }

            pub fn token_count(&self) -> usize {
                self.files.iter().map(SegmentedFile::token_count).sum()
            }

            pub fn unit_count(&self) -> usize {
                self.files.iter().map(|f| f.ids.len()).sum()
            }

            /// Files grouped by project, in project order.
            pub fn projects(&self) -> Vec<(&str, Vec<&SegmentedFile>)> {
                let mut groups: BTreeMap<&str, Vec<&SegmentedFile>> = BTreeMap::new();
                for f in &self.files {
                    groups.entry(f.project_id.as_str()).or_default().push(f);
                }
                groups.into_iter().collect()
            }
        }
    };
}

role!(TrainSet);
role!(ValidationSet);
role!(TestSet);

/// Files of every role after a project-level split.
#[derive(Debug, Clone, Default)]
pub struct Partitioned {
    pub train: TrainSet,
    pub validation: ValidationSet,
    pub test: TestSet,
    /// Held out from training; used to learn the merge table.
    pub encoding: Vec<SegmentedFile>,
}

/// Routes each file to the role of its project.
pub fn partition(files: Vec<SegmentedFile>, split: &CorpusSplit) -> Partitioned {
    let (mut train, mut validation, mut test, mut encoding) = (vec![], vec![], vec![], vec![]);
    for f in files {
        let p = &f.project_id;
        if split.validation.contains(p) {
            validation.push(f);
        } else if split.test.contains(p) {
            test.push(f);
        } else if split.encoding.contains(p) {
            encoding.push(f);
        } else {
            train.push(f);
        }
    }
    Partitioned {
        train: TrainSet::new(train),
        validation: ValidationSet::new(validation),
        test: TestSet::new(test),
        encoding,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(p: &str, f: &str) -> SegmentedFile {
        SegmentedFile {
            project_id: p.into(),
            file_id: f.into(),
            ids: vec![],
            token_ends: vec![],
        }
    }

    #[test]
    fn files_follow_their_project() {
        let split = CorpusSplit {
            train: ["a".to_string()].into(),
            validation: ["b".to_string()].into(),
            test: ["c".to_string()].into(),
            encoding: ["d".to_string()].into(),
        };
        let parts = partition(
            vec![file("c", "2"), file("a", "1"), file("c", "1"), file("b", "x"), file("d", "y")],
            &split,
        );
        assert_eq!(parts.train.files().len(), 1);
        assert_eq!(parts.validation.files()[0].project_id, "b");
        assert_eq!(parts.encoding[0].project_id, "d");
        let test: Vec<_> = parts.test.files().iter().map(|f| f.path_key()).collect();
        assert_eq!(test, vec!["c/1", "c/2"]);
        let projects = parts.test.projects();
        assert_eq!(projects.len(), 1);
        assert_eq!(projects[0].1.len(), 2);
    }
}
