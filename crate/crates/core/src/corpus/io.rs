use std::collections::HashSet;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::value::{infer_type, parse_field, ColumnType};
use super::{Column, Corpus, CorpusError, JoinEdge, Table, Task, Value};

/// Contents of `graph.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub base_table: String,
    pub target: String,
    pub task: Task,
    pub tables: Vec<String>,
    pub edges: Vec<ManifestEdge>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_description: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEdge {
    pub from_table: String,
    pub from_column: String,
    pub to_table: String,
    pub to_column: String,
}

impl From<ManifestEdge> for JoinEdge {
    fn from(e: ManifestEdge) -> Self {
        JoinEdge { from_table: e.from_table, from_column: e.from_column, to_table: e.to_table, to_column: e.to_column }
    }
}

/// Loads `<dir>/graph.json` and one `<table>.csv` per listed table.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let dir = dir.as_ref();
    let manifest_path = dir.join("graph.json");
    if !manifest_path.is_file() {
        return Err(CorpusError::MissingManifest(manifest_path.display().to_string()));
    }
    let file = File::open(&manifest_path).map_err(|source| CorpusError::Io { path: manifest_path.display().to_string(), source })?;
    let manifest: Manifest = serde_json::from_reader(BufReader::new(file)).map_err(|e| CorpusError::Manifest(e.to_string()))?;

    let mut seen = HashSet::new();
    let mut tables = Vec::with_capacity(manifest.tables.len());
    for name in &manifest.tables {
        if !seen.insert(name.as_str()) {
            return Err(CorpusError::DuplicateTable(name.clone()));
        }
        tables.push(read_table_csv(dir.join(format!("{name}.csv")), name)?);
    }
    for e in &manifest.edges {
        for t in [&e.from_table, &e.to_table] {
            if !seen.contains(t.as_str()) {
                return Err(CorpusError::UnknownTable(t.clone()));
            }
        }
    }
    if !seen.contains(manifest.base_table.as_str()) {
        return Err(CorpusError::UnknownTable(manifest.base_table.clone()));
    }

    let edges = manifest.edges.into_iter().map(JoinEdge::from).collect();
    Ok(Corpus::new(tables, edges, manifest.base_table, manifest.target, manifest.task)?
        .with_descriptions(manifest.dataset_description, manifest.task_description))
}

/// Reads one CSV file (header row, RFC-4180 quoting) into a typed table.
pub fn read_table_csv(path: impl AsRef<Path>, name: &str) -> Result<Table, CorpusError> {
    read_csv_with(path.as_ref(), name, None)
}

/// Reads a CSV whose column types are already known, one per header field.
pub fn read_table_csv_typed(path: impl AsRef<Path>, name: &str, types: &[ColumnType]) -> Result<Table, CorpusError> {
    read_csv_with(path.as_ref(), name, Some(types))
}

fn read_csv_with(path: &Path, name: &str, types: Option<&[ColumnType]>) -> Result<Table, CorpusError> {
    let csv_err = |source| CorpusError::Csv { table: name.to_string(), source };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path).map_err(csv_err)?;
    let headers: Vec<String> = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();

    let mut records = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { len, .. } => {
                CorpusError::RaggedRow { table: name.to_string(), row, found: *len as usize, expected: headers.len() }
            }
            _ => csv_err(e),
        })?;
        records.push(rec);
    }

    if let Some(types) = types {
        if types.len() != headers.len() {
            return Err(CorpusError::RaggedRow { table: name.to_string(), row: 0, found: headers.len(), expected: types.len() });
        }
    }
    let columns = headers
        .iter()
        .enumerate()
        .map(|(i, h)| {
            let fields = records.iter().map(move |r| r.get(i).unwrap_or(""));
            let ty = types.map_or_else(|| infer_type(fields.clone()), |t| t[i]);
            Column::new(h.clone(), ty, fields.map(|f| parse_field(f, ty)).collect())
        })
        .collect();
    Table::new(name, columns)
}

/// Writes `graph.json` and one CSV per table so that [`load_dataset`] reads the corpus back.
pub fn write_dataset(corpus: &Corpus, dir: impl AsRef<Path>) -> Result<(), CorpusError> {
    let dir = dir.as_ref();
    let io_err = |source| CorpusError::Io { path: dir.display().to_string(), source };
    std::fs::create_dir_all(dir).map_err(io_err)?;
    for t in corpus.tables() {
        let cols: Vec<(&str, &[Value])> = t.columns().iter().map(|c| (c.name.as_str(), c.values.as_slice())).collect();
        write_csv(dir.join(format!("{}.csv", t.name)), &cols)?;
    }
    let manifest = Manifest {
        base_table: corpus.base_table_name().to_string(),
        target: corpus.target().to_string(),
        task: corpus.task(),
        tables: corpus.table_names().map(str::to_string).collect(),
        edges: corpus
            .edges()
            .iter()
            .map(|e| ManifestEdge {
                from_table: e.from_table.clone(),
                from_column: e.from_column.clone(),
                to_table: e.to_table.clone(),
                to_column: e.to_column.clone(),
            })
            .collect(),
        dataset_description: corpus.dataset_description.clone(),
        task_description: corpus.task_description.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CorpusError::Manifest(e.to_string()))?;
    std::fs::write(dir.join("graph.json"), text).map_err(io_err)
}

/// Writes named columns as CSV in the same dialect the loader reads.
pub fn write_csv(path: impl AsRef<Path>, columns: &[(&str, &[Value])]) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io { path: path.display().to_string(), source };
    let mut w = csv::Writer::from_path(path).map_err(|e| CorpusError::Csv { table: path.display().to_string(), source: e })?;
    let rows = columns.first().map_or(0, |(_, v)| v.len());
    let to_io = |e: csv::Error| io_err(std::io::Error::other(e));
    w.write_record(columns.iter().map(|(n, _)| *n)).map_err(to_io)?;
    let mut record = Vec::with_capacity(columns.len());
    for r in 0..rows {
        record.clear();
        record.extend(columns.iter().map(|(_, v)| v[r].to_csv_field()));
        w.write_record(&record).map_err(to_io)?;
    }
    w.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ColumnType;
    use std::fs;

    fn write(dir: &Path, name: &str, body: &str) {
        fs::write(dir.join(name), body).unwrap();
    }

    fn three_table_dir() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "orders.csv", "id,cust_id,amount,label\n1,10,5.5,yes\n2,,7,no\n3,11,1,yes\n4,10,2,no\n");
        write(dir.path(), "customers.csv", "id,region_id,name\n10,100,\"Smith, J\"\n11,101,Lee\n");
        write(dir.path(), "regions.csv", "id,zone\n100,north\n101,NA\n");
        write(
            dir.path(),
            "graph.json",
            r#"{"base_table":"orders","target":"label","task":"classification",
                "tables":["orders","customers","regions"],
                "edges":[{"from_table":"orders","from_column":"cust_id","to_table":"customers","to_column":"id"},
                         {"from_table":"customers","from_column":"region_id","to_table":"regions","to_column":"id"}],
                "dataset_description":"Retail orders"}"#,
        );
        dir
    }

    #[test]
    fn loads_structure() {
        let dir = three_table_dir();
        let corpus = load_dataset(dir.path()).unwrap();
        assert_eq!(corpus.num_tables(), 3);
        assert_eq!(corpus.edges().len(), 2);
        assert_eq!(corpus.dataset_description.as_deref(), Some("Retail orders"));
        let orders = corpus.table("orders").unwrap();
        let cust = orders.column("cust_id").unwrap();
        assert_eq!(cust.ty, ColumnType::Integer);
        assert_eq!(cust.values[1], Value::Null);
        assert_eq!(orders.column("amount").unwrap().ty, ColumnType::Float);
        let customers = corpus.table("customers").unwrap();
        assert_eq!(customers.column("name").unwrap().values[0], Value::text("Smith, J"));
        assert_eq!(corpus.table("regions").unwrap().column("zone").unwrap().values[1], Value::Null);
    }

    #[test]
    fn empty_cell_in_integer_column_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "t.csv", "k,v\n1,a\n,b\n3,c\n4,d\n");
        let t = read_table_csv(dir.path().join("t.csv"), "t").unwrap();
        let col = t.column("k").unwrap();
        assert_eq!(col.ty, ColumnType::Integer);
        assert_eq!(col.values, vec![Value::Int(1), Value::Null, Value::Int(3), Value::Int(4)]);

        let out = dir.path().join("out.csv");
        write_csv(&out, &[("k", &col.values)]).unwrap();
        let again = read_table_csv(&out, "t").unwrap();
        assert_eq!(again.column("k").unwrap().values, col.values);
    }

    #[test]
    fn unknown_column_in_manifest() {
        let dir = three_table_dir();
        let manifest = fs::read_to_string(dir.path().join("graph.json")).unwrap();
        write(dir.path(), "graph.json", &manifest.replace("region_id", "region_ref"));
        let err = load_dataset(dir.path()).unwrap_err();
        assert!(err.to_string().contains("unknown column"), "{err}");
    }

    #[test]
    fn manifest_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(CorpusError::MissingManifest(_))));

        let dir = three_table_dir();
        let manifest = fs::read_to_string(dir.path().join("graph.json")).unwrap();
        write(dir.path(), "graph.json", &manifest.replace(r#""regions"]"#, r#""regions","orders"]"#));
        assert!(matches!(load_dataset(dir.path()), Err(CorpusError::DuplicateTable(_))));

        let dir = three_table_dir();
        fs::remove_file(dir.path().join("regions.csv")).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(CorpusError::Csv { .. })));

        let dir = three_table_dir();
        write(dir.path(), "orders.csv", "id,cust_id,amount,label\n1,10,5.5,yes\n2,10,1,yes\n");
        assert!(matches!(load_dataset(dir.path()), Err(CorpusError::TooFewClasses { .. })));

        let dir = three_table_dir();
        write(dir.path(), "regions.csv", "id,zone\n100,north,extra\n");
        assert!(matches!(load_dataset(dir.path()), Err(CorpusError::RaggedRow { .. })));
    }

    #[test]
    fn dataset_round_trip() {
        let dir = three_table_dir();
        let a = load_dataset(dir.path()).unwrap();
        let out = tempfile::tempdir().unwrap();
        write_dataset(&a, out.path()).unwrap();
        let b = load_dataset(out.path()).unwrap();
        for (x, y) in a.tables().zip(b.tables()) {
            assert_eq!(x, y);
        }
        assert_eq!(b.dataset_description, a.dataset_description);
    }

    #[test]
    fn loading_twice_is_identical() {
        let dir = three_table_dir();
        let a = load_dataset(dir.path()).unwrap();
        let b = load_dataset(dir.path()).unwrap();
        for (x, y) in a.tables().zip(b.tables()) {
            assert_eq!(x, y);
        }
        assert_eq!(a.edges(), b.edges());
    }
}
