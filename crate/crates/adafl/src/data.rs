//! Dataset construction: a synthetic Gaussian-cluster generator, IID and
//! shard-based non-IID partitioners, and an IDX loader for MNIST-style
//! binary files.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use byteorder::{BigEndian, ReadBytesExt};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const IDX_IMAGE_MAGIC: u32 = 2051;
const IDX_LABEL_MAGIC: u32 = 2049;

/// A labelled classification dataset.
///
/// Features are stored row-major as one contiguous `n_samples × n_features`
/// buffer of 64-bit reals; labels are class indices in `[0, n_classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    n_features: usize,
    n_classes: usize,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::InvalidData("n_features must be >= 1".into()));
        }
        if features.len() != labels.len() * n_features {
            return Err(Error::DimensionMismatch(format!(
                "{} feature values do not form {} rows of width {}",
                features.len(),
                labels.len(),
                n_features
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::InvalidData(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        Ok(Self {
            features,
            labels,
            n_features,
            n_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn row(&self, index: usize) -> &[f64] {
        let start = index * self.n_features;
        &self.features[start..start + self.n_features]
    }

    pub fn label(&self, index: usize) -> usize {
        self.labels[index]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// New dataset holding the given rows, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset {
            features,
            labels,
            n_features: self.n_features,
            n_classes: self.n_classes,
        }
    }

    /// Same samples with the class count widened (labels must still fit).
    pub fn with_class_count(&self, n_classes: usize) -> Result<Dataset> {
        Dataset::new(
            self.features.clone(),
            self.n_features,
            self.labels.clone(),
            n_classes,
        )
    }
}

/// Per-client private datasets forming an exhaustive, disjoint split of a
/// source dataset. Both partitioners enforce equal client sizes.
#[derive(Debug, Clone)]
pub struct ClientPartition {
    client_datasets: Vec<Dataset>,
}

impl ClientPartition {
    pub fn num_clients(&self) -> usize {
        self.client_datasets.len()
    }

    pub fn client(&self, index: usize) -> &Dataset {
        &self.client_datasets[index]
    }

    pub fn datasets(&self) -> &[Dataset] {
        &self.client_datasets
    }

    /// Local dataset sizes `n_1..n_M`.
    pub fn sizes(&self) -> Vec<usize> {
        self.client_datasets.iter().map(Dataset::len).collect()
    }
}

/// Generate a balanced Gaussian-cluster classification dataset.
///
/// Each class gets a seeded random mean vector (standard normal per
/// coordinate); samples are the mean plus isotropic Gaussian noise of
/// scale `cluster_spread`. Class counts are balanced to within one
/// sample, samples are emitted class-major, and the output is
/// bit-identical for a fixed seed.
pub fn generate_synthetic(
    n_samples: usize,
    n_features: usize,
    n_classes: usize,
    cluster_spread: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_classes == 0 || n_features == 0 {
        return Err(Error::InvalidConfig(
            "n_classes and n_features must be >= 1".into(),
        ));
    }
    if n_samples < n_classes {
        return Err(Error::InvalidConfig(format!(
            "n_samples ({n_samples}) must be >= n_classes ({n_classes})"
        )));
    }
    if !cluster_spread.is_finite() || cluster_spread <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "cluster_spread must be finite and > 0, got {cluster_spread}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<Vec<f64>> = (0..n_classes)
        .map(|_| (0..n_features).map(|_| rng.sample(StandardNormal)).collect())
        .collect();

    let base = n_samples / n_classes;
    let extra = n_samples % n_classes;
    let mut features = Vec::with_capacity(n_samples * n_features);
    let mut labels = Vec::with_capacity(n_samples);
    for (class, mean) in means.iter().enumerate() {
        let count = base + usize::from(class < extra);
        for _ in 0..count {
            for &m in mean {
                let noise: f64 = rng.sample(StandardNormal);
                features.push(m + cluster_spread * noise);
            }
            labels.push(class);
        }
    }
    Dataset::new(features, n_features, labels, n_classes)
}

/// Label-sorted shard partition: the classic non-IID split.
///
/// Samples are sorted by label, cut into `n_clients × shards_per_client`
/// contiguous shards, and shards are dealt to clients by a seeded
/// permutation, `shards_per_client` each. Every client ends up with the
/// same number of samples and at most `shards_per_client` distinct labels
/// (when the source is label-balanced).
pub fn partition_noniid_shards(
    dataset: &Dataset,
    n_clients: usize,
    shards_per_client: usize,
    seed: u64,
) -> Result<ClientPartition> {
    if n_clients == 0 || shards_per_client == 0 {
        return Err(Error::InvalidConfig(
            "n_clients and shards_per_client must be >= 1".into(),
        ));
    }
    let n = dataset.len();
    let total_shards = n_clients * shards_per_client;
    if n == 0 || !n.is_multiple_of(total_shards) {
        return Err(Error::InvalidConfig(format!(
            "shard partition needs the {n} samples to split into {total_shards} equal shards \
             ({n_clients} clients x {shards_per_client} shards); nearest valid sizes are \
             {} and {}",
            (n / total_shards) * total_shards,
            (n / total_shards + 1) * total_shards,
        )));
    }
    let shard_len = n / total_shards;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| dataset.label(i));

    let mut shard_ids: Vec<usize> = (0..total_shards).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shard_ids.shuffle(&mut rng);

    let client_datasets = (0..n_clients)
        .map(|c| {
            let mut assigned: Vec<usize> =
                shard_ids[c * shards_per_client..(c + 1) * shards_per_client].to_vec();
            // concatenate in ascending shard order so each client's samples
            // stay label-sorted
            assigned.sort_unstable();
            let mut indices = Vec::with_capacity(shards_per_client * shard_len);
            for shard in assigned {
                indices.extend_from_slice(&order[shard * shard_len..(shard + 1) * shard_len]);
            }
            dataset.subset(&indices)
        })
        .collect();
    Ok(ClientPartition { client_datasets })
}

/// IID partition: seeded shuffle followed by an equal contiguous split.
pub fn partition_iid(dataset: &Dataset, n_clients: usize, seed: u64) -> Result<ClientPartition> {
    if n_clients == 0 {
        return Err(Error::InvalidConfig("n_clients must be >= 1".into()));
    }
    let n = dataset.len();
    if n == 0 || !n.is_multiple_of(n_clients) {
        return Err(Error::InvalidConfig(format!(
            "IID partition needs the {n} samples to split evenly over {n_clients} clients; \
             nearest valid sizes are {} and {}",
            (n / n_clients) * n_clients,
            (n / n_clients + 1) * n_clients,
        )));
    }
    let per_client = n / n_clients;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let client_datasets = order
        .chunks(per_client)
        .map(|chunk| dataset.subset(chunk))
        .collect();
    Ok(ClientPartition { client_datasets })
}

/// Load an IDX image/label file pair into a dataset.
///
/// Images: big-endian magic 2051, then count/rows/cols as big-endian u32,
/// then `count×rows×cols` unsigned bytes scaled to `[0, 1]` by `/255`.
/// Labels: magic 2049, then count, then `count` bytes. The two counts
/// must match.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let (features, n_features, image_count) = read_idx_images(images_path)?;
    let labels = read_idx_labels(labels_path)?;
    if image_count != labels.len() {
        return Err(Error::IdxCountMismatch {
            images: image_count,
            labels: labels.len(),
        });
    }
    let n_classes = labels.iter().copied().max().map_or(1, |m| m + 1);
    Dataset::new(features, n_features, labels, n_classes)
}

fn truncated(path: &Path, detail: impl Into<String>) -> Error {
    Error::IdxTruncated {
        path: path.to_path_buf(),
        detail: detail.into(),
    }
}

fn read_header_u32(reader: &mut impl Read, path: &Path, what: &str) -> Result<u32> {
    reader
        .read_u32::<BigEndian>()
        .map_err(|_| truncated(path, format!("missing {what}")))
}

fn read_idx_images(path: &Path) -> Result<(Vec<f64>, usize, usize)> {
    let mut reader = BufReader::new(File::open(path)?);
    let magic = read_header_u32(&mut reader, path, "magic number")?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::IdxMagic {
            path: path.to_path_buf(),
            expected: IDX_IMAGE_MAGIC,
            found: magic,
        });
    }
    let count = read_header_u32(&mut reader, path, "image count")? as usize;
    let rows = read_header_u32(&mut reader, path, "row count")? as usize;
    let cols = read_header_u32(&mut reader, path, "column count")? as usize;
    let n_features = rows * cols;
    if n_features == 0 {
        return Err(Error::InvalidData(format!(
            "{}: image dimensions {rows}x{cols} are empty",
            path.display()
        )));
    }
    let mut bytes = vec![0u8; count * n_features];
    reader
        .read_exact(&mut bytes)
        .map_err(|_| truncated(path, format!("expected {} pixel bytes", bytes.len())))?;
    let features = bytes.iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok((features, n_features, count))
}

fn read_idx_labels(path: &Path) -> Result<Vec<usize>> {
    let mut reader = BufReader::new(File::open(path)?);
    let magic = read_header_u32(&mut reader, path, "magic number")?;
    if magic != IDX_LABEL_MAGIC {
        return Err(Error::IdxMagic {
            path: path.to_path_buf(),
            expected: IDX_LABEL_MAGIC,
            found: magic,
        });
    }
    let count = read_header_u32(&mut reader, path, "label count")? as usize;
    let mut bytes = vec![0u8; count];
    reader
        .read_exact(&mut bytes)
        .map_err(|_| truncated(path, format!("expected {count} label bytes")))?;
    Ok(bytes.into_iter().map(usize::from).collect())
}
