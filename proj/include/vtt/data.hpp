#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "vtt/grading.hpp"

namespace vtt {

struct DatasetConfig {
  int n_images = 200;
  // Proportions of grades 0, 1, 2.
  std::array<double, kNumGrades> grade_mix = {0.44, 0.06, 0.50};
  // Chance that each further quadrant (beyond the grade-forced one) holds exudates.
  double ex_quadrant_rate = 0.4;
  double od_two_quadrant_rate = 0.3;
  std::uint64_t seed = 0;

  void validate() const;  // InvalidInput
};

// Exact per-grade counts for n images (largest-remainder rounding).
std::array<int, kNumGrades> grade_counts(int n, const std::array<double, kNumGrades>& mix);

std::vector<GroundTruthImage> generate_dataset(const DatasetConfig& cfg);

// Annotation CSV: image_id, 12 quadrant bits (ex, od, fov), grade.
// Whole-image cells are derived on load.
void save_annotations(const std::vector<GroundTruthImage>& images, std::ostream& out);
void save_annotations(const std::vector<GroundTruthImage>& images,
                      const std::filesystem::path& path);
// Throws SchemaViolation naming the offending line.
std::vector<GroundTruthImage> load_annotations(std::istream& in);
std::vector<GroundTruthImage> load_annotations(const std::filesystem::path& path);

struct SplitSpec {
  double train = 0.6;
  double validation = 0.1;
  double test = 0.3;

  void validate() const;  // InvalidInput
};

struct DatasetSplit {
  std::vector<GroundTruthImage> train;
  std::vector<GroundTruthImage> validation;
  std::vector<GroundTruthImage> test;
  // Non-fatal notes, e.g. a grade absent from one split.
  std::vector<std::string> warnings;
};

// Stratified by grade and deterministic under the seed.
DatasetSplit split_dataset(const std::vector<GroundTruthImage>& images, const SplitSpec& spec,
                           std::uint64_t seed);

std::array<int, kNumGrades> count_grades(const std::vector<GroundTruthImage>& images);

}  // namespace vtt
