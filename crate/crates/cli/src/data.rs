//! Data directory layout.
//!
//! CF: `ratings.csv` (`user_id,item_id,rating`), `requests.csv` (known
//! ratings of each active user) and `test.csv` (held-out ratings; their
//! items are the prediction targets). Search: `corpus.tsv`
//! (`doc_id<TAB>text`) and `requests.tsv` (`request_id<TAB>query`).

use std::fs::{self, File};
use std::path::Path;

use accuracytrader::cf::{self, CfRequest, TestRating};
use accuracytrader::dataset::{load_corpus, load_ratings, Corpus, Dataset, PointId, RatingMatrix, RatingScale};
use accuracytrader::search::{self, SearchRequest, DEFAULT_K};
use accuracytrader::Error;

use crate::{CliResult, WorkloadArg};

pub const RATINGS: &str = "ratings.csv";
pub const CF_REQUESTS: &str = "requests.csv";
pub const TEST: &str = "test.csv";
pub const CORPUS: &str = "corpus.tsv";
pub const SEARCH_REQUESTS: &str = "requests.tsv";

pub enum Data {
    Cf {
        matrix: RatingMatrix,
        requests: Vec<(PointId, CfRequest)>,
        test: Vec<TestRating>,
    },
    Search {
        corpus: Corpus,
        requests: Vec<(u64, SearchRequest)>,
    },
}

impl Data {
    pub fn dataset(&self) -> Dataset {
        match self {
            Data::Cf { matrix, .. } => Dataset::Ratings(matrix.clone()),
            Data::Search { corpus, .. } => Dataset::Text(corpus.clone()),
        }
    }
}

fn open(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|e| {
        Error::Io {
            path: path.to_path_buf(),
            source: e,
        }
        .into()
    })
}

pub fn load_data(dir: &Path, workload: WorkloadArg, scale: RatingScale) -> CliResult<Data> {
    match workload {
        WorkloadArg::Cf => {
            let matrix = load_ratings(dir.join(RATINGS), scale)?;
            let test_path = dir.join(TEST);
            let test = cf::parse_test_set(open(&test_path)?, &test_path)?;
            let req_path = dir.join(CF_REQUESTS);
            let requests = cf::parse_requests(open(&req_path)?, &req_path, &test)?;
            Ok(Data::Cf { matrix, requests, test })
        }
        WorkloadArg::Search => {
            let corpus = load_corpus(dir.join(CORPUS))?;
            let req_path = dir.join(SEARCH_REQUESTS);
            let requests = search::parse_requests(open(&req_path)?, &req_path, DEFAULT_K)?;
            Ok(Data::Search { corpus, requests })
        }
    }
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::Io { path, source: e }.into())
}

pub fn write_data(dir: &Path, data: &Data) -> CliResult<()> {
    match data {
        Data::Cf { matrix, requests, test } => {
            write_file(dir, RATINGS, &matrix.to_csv())?;
            write_file(dir, CF_REQUESTS, &cf::requests_to_csv(requests))?;
            write_file(dir, TEST, &cf::test_set_to_csv(test))
        }
        Data::Search { corpus, requests } => {
            write_file(dir, CORPUS, &corpus.to_tsv())?;
            write_file(dir, SEARCH_REQUESTS, &search::requests_to_tsv(requests))
        }
    }
}
