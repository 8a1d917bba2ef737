#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "volgrid/volume.hpp"

namespace volprop {

struct OverlapCounts {
  std::size_t pred = 0;
  std::size_t truth = 0;
  std::size_t intersection = 0;
};

/// Throws DimensionMismatch when the grids differ.
OverlapCounts overlap_counts(const Volume& pred, const Volume& truth);

/// 2|P∩G| / (|P|+|G|). Throws BothEmpty.
double dice(const Volume& pred, const Volume& truth);
/// |P∩G| / |P∪G|. Throws BothEmpty.
double iou(const Volume& pred, const Volume& truth);

/// Foreground voxels with at least one 6-connected background neighbour;
/// outside the grid counts as background. Ordered by linear index.
std::vector<Index3> surface_voxels(const Volume& mask);

/// Symmetric Hausdorff distance in mm between the foreground voxel centres
/// of two masks on the same grid. Throws EitherEmpty.
double hausdorff_mm(const Volume& pred, const Volume& truth);

/// max of the two directed q-quantiles (q in [0, 1]) of surface-to-set
/// distances. Reporting only.
double hausdorff_quantile_mm(const Volume& pred, const Volume& truth, double q = 0.95);

/// M[i][j] = <vi, vj> / (|vi| |vj|). Throws ZeroVector, InvalidArgument on
/// ragged input.
std::vector<std::vector<double>> cosine_similarity_matrix(std::span<const std::vector<double>> vectors);

struct MetricsRecord {
  std::string case_id;
  std::string structure;
  std::string config_id;
  double dice = 0.0;
  double iou = 0.0;
  std::optional<double> hausdorff_mm;  // absent for an empty prediction
  std::optional<double> hd95_mm;
  std::map<std::string, double> timings_ms;  // stage -> total ms; profiling only
};

struct MetricOptions {
  bool hd95 = false;
};

/// Scores one prediction against a nonempty ground truth. An empty
/// prediction scores Dice = IoU = 0 with no Hausdorff distance.
MetricsRecord evaluate(const Volume& pred, const Volume& truth, const MetricOptions& options = {});

struct Stat {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;  // population
};

Stat describe(std::span<const double> values);

struct ClassSummary {
  std::string structure;
  std::size_t count = 0;
  Stat dice;
  Stat iou;
  Stat hausdorff_mm;
  std::size_t hd_excluded = 0;  // records without a Hausdorff value
};

struct AggregateTable {
  std::vector<ClassSummary> classes;  // ordered by structure name
  ClassSummary overall;               // structure = "all"
};

AggregateTable aggregate(std::span<const MetricsRecord> records);

/// Header: config_id,case_id,structure,dice,iou,hausdorff_mm[,hd95_mm].
/// An absent distance is an empty field.
void write_records_csv(std::span<const MetricsRecord> records, const std::filesystem::path& path, bool hd95 = false);

/// Shortest decimal text that round-trips the double.
std::string format_number(double value);

}  // namespace volprop
