#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vibloc/matrix.hpp"

namespace vibloc {

// UJIIndoorLoc conventions: 520 access-point columns, RSSI in [-110, 0]
// dB when detected, the sentinel 100 when not.
constexpr Index kNumWaps = 520;
constexpr double kRssiUndetected = 100.0;
constexpr double kRssiFloorDb = -110.0;

struct RawRecord {
  std::vector<double> rssi;  // exactly kNumWaps entries
  double longitude = 0.0;
  double latitude = 0.0;
  int building = 0;  // carried through for latent plots only
  int floor = 0;
};

// Per-dimension min-max map of the 2-D coordinates onto [0, 1]. Fit on
// the training split only; values outside the fitted range scale to
// values outside [0, 1], which is the documented extrapolation behaviour
// for test rows.
struct CoordScaler {
  Matrix min;  // 1 x 2
  Matrix max;  // 1 x 2

  Matrix apply(const Matrix& coords) const;
  Matrix invert(const Matrix& scaled) const;
};

CoordScaler fit_scaler(const Matrix& coords);

struct FingerprintDataset {
  Matrix X;  // N x kNumWaps, entries in [0, 1]
  Matrix Y;  // N x 2, scaled coordinates
  CoordScaler scaler;
  std::vector<int> building;
  std::vector<int> floor;

  Index rows() const { return X.rows(); }
  Index features() const { return X.cols(); }
};

// Parses the CSV (header row with WAP001..WAP520, LONGITUDE, LATITUDE,
// FLOOR, BUILDINGID columns). Throws IoError if the file is missing and
// ParseError (naming the 1-based line) for malformed rows or RSSI values
// outside [-110, 0] + {100}.
std::vector<RawRecord> load_csv(const std::string& path);

// Sentinel 100 -> -110 (undetected reads as weakest), then the affine map
// [-110, 0] -> [0, 1]: v' = (v + 110) / 110.
Matrix preprocess_rssi(const std::vector<RawRecord>& records);

Matrix raw_coords(const std::vector<RawRecord>& records);

// Features preprocessed, coordinates still raw; what the ingest cache holds.
struct PreparedData {
  Matrix X;       // N x kNumWaps in [0, 1]
  Matrix coords;  // N x 2 raw longitude/latitude
  std::vector<int> building;
  std::vector<int> floor;

  Index rows() const { return X.rows(); }
};

PreparedData prepare(const std::vector<RawRecord>& records);

struct DataSplit {
  FingerprintDataset train;
  FingerprintDataset test;
};

// Seeded shuffle, then train_frac/(1-train_frac) partition. The scaler is
// fit on the training rows only and applied to both sides.
DataSplit split_dataset(const PreparedData& data, double train_frac,
                        std::uint64_t seed);

// Seeded subsample of ceil(fraction * N) rows. Nested: for the same seed,
// the rows kept at a smaller fraction are a subset of those kept at a
// larger one.
FingerprintDataset labeled_fraction(const FingerprintDataset& train,
                                    double fraction, std::uint64_t seed);

// Carves the last val_fraction of a seeded shuffle out as validation.
struct TrainValSplit {
  FingerprintDataset train;
  FingerprintDataset val;
};

TrainValSplit carve_validation(const FingerprintDataset& data,
                               double val_fraction, std::uint64_t seed);

// Cache IO in the checkpoint container format.
void save_cache(const PreparedData& data, const std::string& path);
PreparedData load_cache(const std::string& path);

// True if the path smells like a cache file rather than a CSV.
bool is_cache_file(const std::string& path);

// Loads either a CSV or a cache file, depending on content.
PreparedData load_prepared(const std::string& path);

}  // namespace vibloc
