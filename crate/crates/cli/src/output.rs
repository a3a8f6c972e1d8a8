//! JSON and CSV rendering of command results.

use serde_json::Value;

use crate::Format;

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

pub struct Output {
    pub json: Value,
    /// Tabular view used for CSV; other results are flattened to key,value.
    pub table: Option<Table>,
}

impl Output {
    pub fn new(json: Value) -> Self {
        Output { json, table: None }
    }

    pub fn with_table(mut self, header: &[&str], rows: Vec<Vec<Value>>) -> Self {
        self.table = Some(Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows,
        });
        self
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.json).expect("values serialize");
                s.push('\n');
                s
            }
            Format::Csv => match &self.table {
                Some(t) => {
                    let mut s = csv_line(t.header.iter().map(String::as_str));
                    for row in &t.rows {
                        let cells: Vec<String> = row.iter().map(cell).collect();
                        s.push_str(&csv_line(cells.iter().map(String::as_str)));
                    }
                    s
                }
                None => {
                    let mut leaves = Vec::new();
                    flatten("", &self.json, &mut leaves);
                    let mut s = csv_line(["key", "value"].into_iter());
                    for (k, v) in leaves {
                        s.push_str(&csv_line([k.as_str(), v.as_str()].into_iter()));
                    }
                    s
                }
            },
        }
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn csv_line<'a>(cells: impl Iterator<Item = &'a str>) -> String {
    let mut line = cells
        .map(|c| {
            if c.contains([',', '"', '\n']) {
                format!("\"{}\"", c.replace('"', "\"\""))
            } else {
                c.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join(",");
    line.push('\n');
    line
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                flatten(&key(k), x, out);
            }
        }
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                flatten(&key(&i.to_string()), x, out);
            }
        }
        leaf => out.push((prefix.to_string(), cell(leaf))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn csv_flattening_and_quoting() {
        let out = Output::new(json!({"a": 1, "b": {"c": [2, "x,y"]}}));
        assert_eq!(out.render(Format::Csv), "key,value\na,1\nb.c.0,2\nb.c.1,\"x,y\"\n");
        let t = Output::new(json!({})).with_table(&["n", "v"], vec![vec![json!(1), json!(0.5)]]);
        assert_eq!(t.render(Format::Csv), "n,v\n1,0.5\n");
    }
}
