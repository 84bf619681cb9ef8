use std::fmt;

/// One row of a forward-pass shape listing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShapeRecord {
    pub label: String,
    pub input: Vec<usize>,
    pub output: Vec<usize>,
}

impl ShapeRecord {
    pub fn new(label: impl Into<String>, input: &[usize], output: &[usize]) -> Self {
        ShapeRecord { label: label.into(), input: input.to_vec(), output: output.to_vec() }
    }
}

fn tuple(dims: &[usize]) -> String {
    let inner: Vec<String> = dims.iter().map(|d| d.to_string()).collect();
    format!("({})", inner.join(","))
}

impl fmt::Display for ShapeRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<28} {:>20} -> {}", self.label, tuple(&self.input), tuple(&self.output))
    }
}

pub(crate) type Trace<'a> = Option<&'a mut Vec<ShapeRecord>>;
