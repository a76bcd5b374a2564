#include "vibloc/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "vibloc/checkpoint.hpp"
#include "vibloc/rng.hpp"

namespace vibloc {

Matrix CoordScaler::apply(const Matrix& coords) const {
  if (coords.cols() != 2) {
    throw DimensionError("CoordScaler: expected 2 columns, got " +
                         shape_str(coords));
  }
  Matrix out(coords.rows(), 2);
  for (Index d = 0; d < 2; ++d) {
    out.col(d) = (coords.col(d).array() - min(0, d)) / (max(0, d) - min(0, d));
  }
  return out;
}

Matrix CoordScaler::invert(const Matrix& scaled) const {
  if (scaled.cols() != 2) {
    throw DimensionError("CoordScaler: expected 2 columns, got " +
                         shape_str(scaled));
  }
  Matrix out(scaled.rows(), 2);
  for (Index d = 0; d < 2; ++d) {
    out.col(d) = scaled.col(d).array() * (max(0, d) - min(0, d)) + min(0, d);
  }
  return out;
}

CoordScaler fit_scaler(const Matrix& coords) {
  if (coords.rows() < 1 || coords.cols() != 2) {
    throw DimensionError("fit_scaler: need an Nx2 matrix, got " +
                         shape_str(coords));
  }
  CoordScaler s;
  s.min = coords.colwise().minCoeff();
  s.max = coords.colwise().maxCoeff();
  for (Index d = 0; d < 2; ++d) {
    if (!(s.max(0, d) > s.min(0, d))) {
      throw DomainError("fit_scaler: degenerate coordinate dimension " +
                        std::to_string(d) + " (min == max == " +
                        std::to_string(s.min(0, d)) + ")");
    }
  }
  return s;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r') {
    out.back().pop_back();
  }
  return out;
}

double parse_cell(const std::string& cell, long line_no,
                  const std::string& column) {
  double v = 0.0;
  const char* begin = cell.data();
  const char* end = cell.data() + cell.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw ParseError("line " + std::to_string(line_no) + ", column " + column +
                     ": non-numeric cell '" + cell + "'");
  }
  return v;
}

}  // namespace

std::vector<RawRecord> load_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open data file '" + path + "'");

  std::string line;
  if (!std::getline(f, line)) {
    throw ParseError("line 1: empty file, expected a header row");
  }
  const std::vector<std::string> header = split_fields(line);

  std::vector<std::size_t> wap_cols;
  long lon_col = -1, lat_col = -1, floor_col = -1, building_col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string& name = header[i];
    if (name.rfind("WAP", 0) == 0) {
      wap_cols.push_back(i);
    } else if (name == "LONGITUDE") {
      lon_col = static_cast<long>(i);
    } else if (name == "LATITUDE") {
      lat_col = static_cast<long>(i);
    } else if (name == "FLOOR") {
      floor_col = static_cast<long>(i);
    } else if (name == "BUILDINGID") {
      building_col = static_cast<long>(i);
    }
  }
  if (static_cast<Index>(wap_cols.size()) != kNumWaps) {
    throw ParseError("line 1: expected " + std::to_string(kNumWaps) +
                     " WAP columns, found " + std::to_string(wap_cols.size()));
  }
  if (lon_col < 0 || lat_col < 0 || floor_col < 0 || building_col < 0) {
    throw ParseError(
        "line 1: header must name LONGITUDE, LATITUDE, FLOOR and BUILDINGID");
  }

  std::vector<RawRecord> records;
  long line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = split_fields(line);
    if (cells.size() != header.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " cells, found " +
                       std::to_string(cells.size()));
    }
    RawRecord rec;
    rec.rssi.resize(static_cast<std::size_t>(kNumWaps));
    for (std::size_t w = 0; w < wap_cols.size(); ++w) {
      const double v = parse_cell(cells[wap_cols[w]], line_no,
                                  header[wap_cols[w]]);
      const bool detected = v >= kRssiFloorDb && v <= 0.0;
      if (!detected && v != kRssiUndetected) {
        throw ParseError("line " + std::to_string(line_no) + ", column " +
                         header[wap_cols[w]] + ": RSSI " + std::to_string(v) +
                         " outside [-110, 0] and not the sentinel 100");
      }
      rec.rssi[w] = v;
    }
    rec.longitude = parse_cell(cells[static_cast<std::size_t>(lon_col)],
                               line_no, "LONGITUDE");
    rec.latitude = parse_cell(cells[static_cast<std::size_t>(lat_col)],
                              line_no, "LATITUDE");
    rec.floor = static_cast<int>(parse_cell(
        cells[static_cast<std::size_t>(floor_col)], line_no, "FLOOR"));
    rec.building = static_cast<int>(parse_cell(
        cells[static_cast<std::size_t>(building_col)], line_no, "BUILDINGID"));
    records.push_back(std::move(rec));
  }
  return records;
}

Matrix preprocess_rssi(const std::vector<RawRecord>& records) {
  Matrix X(static_cast<Index>(records.size()), kNumWaps);
  for (Index r = 0; r < X.rows(); ++r) {
    const auto& rssi = records[static_cast<std::size_t>(r)].rssi;
    for (Index c = 0; c < kNumWaps; ++c) {
      double v = rssi[static_cast<std::size_t>(c)];
      if (v == kRssiUndetected) v = kRssiFloorDb;
      X(r, c) = (v - kRssiFloorDb) / -kRssiFloorDb;
    }
  }
  return X;
}

Matrix raw_coords(const std::vector<RawRecord>& records) {
  Matrix coords(static_cast<Index>(records.size()), 2);
  for (Index r = 0; r < coords.rows(); ++r) {
    coords(r, 0) = records[static_cast<std::size_t>(r)].longitude;
    coords(r, 1) = records[static_cast<std::size_t>(r)].latitude;
  }
  return coords;
}

PreparedData prepare(const std::vector<RawRecord>& records) {
  PreparedData data;
  data.X = preprocess_rssi(records);
  data.coords = raw_coords(records);
  data.building.reserve(records.size());
  data.floor.reserve(records.size());
  for (const auto& rec : records) {
    data.building.push_back(rec.building);
    data.floor.push_back(rec.floor);
  }
  return data;
}

namespace {

template <typename Source>
FingerprintDataset gather(const Source& data, const std::vector<Index>& rows,
                          const Matrix& scaled_Y, const CoordScaler& scaler) {
  FingerprintDataset out;
  out.X.resize(static_cast<Index>(rows.size()), data.X.cols());
  out.Y.resize(static_cast<Index>(rows.size()), 2);
  out.scaler = scaler;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.X.row(static_cast<Index>(i)) = data.X.row(rows[i]);
    out.Y.row(static_cast<Index>(i)) = scaled_Y.row(rows[i]);
    out.building.push_back(data.building[static_cast<std::size_t>(rows[i])]);
    out.floor.push_back(data.floor[static_cast<std::size_t>(rows[i])]);
  }
  return out;
}

}  // namespace

DataSplit split_dataset(const PreparedData& data, double train_frac,
                        std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw DomainError("split_dataset: train_frac must be in (0, 1), got " +
                      std::to_string(train_frac));
  }
  const Index n = data.rows();
  const Index n_train =
      static_cast<Index>(std::llround(train_frac * static_cast<double>(n)));
  if (n_train < 1 || n_train >= n) {
    throw DomainError("split_dataset: split of " + std::to_string(n) +
                      " rows at fraction " + std::to_string(train_frac) +
                      " leaves an empty side");
  }

  const std::vector<Index> perm = Rng(seed).derive("split").permutation(n);
  std::vector<Index> train_rows(perm.begin(), perm.begin() + n_train);
  std::vector<Index> test_rows(perm.begin() + n_train, perm.end());

  Matrix train_coords(n_train, 2);
  for (Index i = 0; i < n_train; ++i) {
    train_coords.row(i) = data.coords.row(train_rows[static_cast<std::size_t>(i)]);
  }
  const CoordScaler scaler = fit_scaler(train_coords);
  const Matrix scaled_Y = scaler.apply(data.coords);

  DataSplit split;
  split.train = gather(data, train_rows, scaled_Y, scaler);
  split.test = gather(data, test_rows, scaled_Y, scaler);
  return split;
}

namespace {

FingerprintDataset take_rows(const FingerprintDataset& src,
                             const std::vector<Index>& rows) {
  FingerprintDataset out;
  out.X.resize(static_cast<Index>(rows.size()), src.X.cols());
  out.Y.resize(static_cast<Index>(rows.size()), src.Y.cols());
  out.scaler = src.scaler;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.X.row(static_cast<Index>(i)) = src.X.row(rows[i]);
    out.Y.row(static_cast<Index>(i)) = src.Y.row(rows[i]);
    out.building.push_back(src.building[static_cast<std::size_t>(rows[i])]);
    out.floor.push_back(src.floor[static_cast<std::size_t>(rows[i])]);
  }
  return out;
}

}  // namespace

FingerprintDataset labeled_fraction(const FingerprintDataset& train,
                                    double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw DomainError("labeled_fraction: fraction must be in (0, 1], got " +
                      std::to_string(fraction));
  }
  const Index n = train.rows();
  // Small backoff keeps exact products like 0.1 * 16000 from ceiling up.
  const Index k = static_cast<Index>(
      std::ceil(fraction * static_cast<double>(n) - 1e-9));
  if (k < 1) {
    throw DomainError("labeled_fraction: fraction " + std::to_string(fraction) +
                      " of " + std::to_string(n) + " rows selects nothing");
  }
  // A fixed seeded permutation makes the subsets nested across fractions:
  // every fraction takes a prefix of the same ordering.
  const std::vector<Index> perm =
      Rng(seed).derive("labeled-fraction").permutation(n);
  std::vector<Index> rows(perm.begin(), perm.begin() + std::min(k, n));
  std::sort(rows.begin(), rows.end());
  return take_rows(train, rows);
}

TrainValSplit carve_validation(const FingerprintDataset& data,
                               double val_fraction, std::uint64_t seed) {
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
    throw DomainError("carve_validation: val_fraction must be in [0, 1)");
  }
  const Index n = data.rows();
  const Index n_val =
      static_cast<Index>(std::llround(val_fraction * static_cast<double>(n)));
  const std::vector<Index> perm = Rng(seed).derive("val-carve").permutation(n);
  std::vector<Index> train_rows(perm.begin(), perm.end() - n_val);
  std::vector<Index> val_rows(perm.end() - n_val, perm.end());
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(val_rows.begin(), val_rows.end());
  TrainValSplit out;
  out.train = take_rows(data, train_rows);
  out.val = take_rows(data, val_rows);
  return out;
}

void save_cache(const PreparedData& data, const std::string& path) {
  Checkpoint ckpt;
  ckpt.meta.emplace_back("kind", "dataset-cache");
  ckpt.meta.emplace_back("rows", std::to_string(data.rows()));
  ckpt.meta.emplace_back("waps", std::to_string(data.X.cols()));
  Matrix aux(data.rows(), 2);
  for (Index r = 0; r < data.rows(); ++r) {
    aux(r, 0) = data.building[static_cast<std::size_t>(r)];
    aux(r, 1) = data.floor[static_cast<std::size_t>(r)];
  }
  ckpt.records.push_back({"X", data.X});
  ckpt.records.push_back({"coords", data.coords});
  ckpt.records.push_back({"aux", aux});
  write_checkpoint(ckpt, path);
}

PreparedData load_cache(const std::string& path) {
  const Checkpoint ckpt = read_checkpoint(path);
  if (ckpt.require_meta("kind") != "dataset-cache") {
    throw ConfigError("'" + path + "' is a " + ckpt.require_meta("kind") +
                      " checkpoint, not a dataset cache");
  }
  PreparedData data;
  const CheckpointRecord* X = ckpt.find_record("X");
  const CheckpointRecord* coords = ckpt.find_record("coords");
  const CheckpointRecord* aux = ckpt.find_record("aux");
  if (!X || !coords || !aux) {
    throw ConfigError("dataset cache is missing X/coords/aux records");
  }
  data.X = X->values;
  data.coords = coords->values;
  if (data.coords.rows() != data.X.rows() || data.coords.cols() != 2 ||
      aux->values.rows() != data.X.rows() || aux->values.cols() != 2) {
    throw ConfigError("dataset cache records have inconsistent shapes");
  }
  for (Index r = 0; r < aux->values.rows(); ++r) {
    data.building.push_back(static_cast<int>(aux->values(r, 0)));
    data.floor.push_back(static_cast<int>(aux->values(r, 1)));
  }
  return data;
}

bool is_cache_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return false;
  std::string head(18, '\0');
  f.read(head.data(), 18);
  return f.gcount() == 18 && head == "VIBLOC-CHECKPOINT ";
}

PreparedData load_prepared(const std::string& path) {
  if (is_cache_file(path)) return load_cache(path);
  return prepare(load_csv(path));
}

}  // namespace vibloc
