#include "vtt/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <cstdio>
#include <sstream>

#include "vtt/errors.hpp"
#include "vtt/rng.hpp"

namespace vtt {

namespace {

constexpr const char* kAnnotationHeader =
    "image_id,ex_q1,ex_q2,ex_q3,ex_q4,od_q1,od_q2,od_q3,od_q4,fov_q1,fov_q2,fov_q3,fov_q4,grade";
// Also accepted on load: the full grid including the whole-image cells,
// which must then equal the OR of their quadrants.
constexpr const char* kFullGridHeader =
    "image_id,ex_whole,ex_q1,ex_q2,ex_q3,ex_q4,od_whole,od_q1,od_q2,od_q3,od_q4,"
    "fov_whole,fov_q1,fov_q2,fov_q3,fov_q4,grade";
constexpr std::array<Concept, 3> kCsvConceptOrder = {Concept::HardExudate,
                                                     Concept::OpticDisc, Concept::Fovea};

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) fields.push_back(f);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

void DatasetConfig::validate() const {
  if (n_images < 1) throw InvalidInput("n_images must be positive");
  double sum = 0.0;
  for (double p : grade_mix) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw InvalidInput("grade_mix entries must be non-negative");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidInput("grade_mix must sum to 1");
  if (!(ex_quadrant_rate >= 0.0 && ex_quadrant_rate <= 1.0)) {
    throw InvalidInput("ex_quadrant_rate must lie in [0, 1]");
  }
  if (!(od_two_quadrant_rate >= 0.0 && od_two_quadrant_rate <= 1.0)) {
    throw InvalidInput("od_two_quadrant_rate must lie in [0, 1]");
  }
}

std::array<int, kNumGrades> grade_counts(int n, const std::array<double, kNumGrades>& mix) {
  std::array<int, kNumGrades> counts{};
  std::array<double, kNumGrades> remainder{};
  int assigned = 0;
  for (int g = 0; g < kNumGrades; ++g) {
    const double exact = n * mix[g];
    counts[g] = static_cast<int>(std::floor(exact));
    remainder[g] = exact - counts[g];
    assigned += counts[g];
  }
  std::array<int, kNumGrades> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return remainder[a] > remainder[b]; });
  for (int k = 0; assigned < n; k = (k + 1) % kNumGrades) {
    ++counts[order[k]];
    ++assigned;
  }
  return counts;
}

std::vector<GroundTruthImage> generate_dataset(const DatasetConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const auto counts = grade_counts(cfg.n_images, cfg.grade_mix);
  std::vector<Grade> grades;
  for (int g = 0; g < kNumGrades; ++g) {
    grades.insert(grades.end(), counts[g], static_cast<Grade>(g));
  }
  std::shuffle(grades.begin(), grades.end(), rng);

  std::uniform_int_distribution<int> quadrant(0, kNumQuadrants - 1);
  std::bernoulli_distribution two_quadrant_disc(cfg.od_two_quadrant_rate);
  std::bernoulli_distribution extra_exudate(cfg.ex_quadrant_rate);
  const auto& od_masks = valid_optic_disc_masks();

  std::vector<GroundTruthImage> images;
  images.reserve(grades.size());
  for (std::size_t i = 0; i < grades.size(); ++i) {
    const int fovea_bit = quadrant(rng);
    const auto fovea = static_cast<QuadrantMask>(1u << fovea_bit);
    // od_masks: four singles followed by four adjacent pairs.
    const QuadrantMask disc = two_quadrant_disc(rng) ? od_masks[4 + quadrant(rng)]
                                                     : od_masks[quadrant(rng)];
    QuadrantMask exudates = 0;
    switch (grades[i]) {
      case Grade::G0:
        break;
      case Grade::G2:
        exudates = fovea;
        for (int b = 0; b < kNumQuadrants; ++b) {
          if (b != fovea_bit && extra_exudate(rng)) exudates |= 1u << b;
        }
        break;
      case Grade::G1: {
        std::uniform_int_distribution<int> other(0, kNumQuadrants - 2);
        int seed_bit = other(rng);
        if (seed_bit >= fovea_bit) ++seed_bit;
        exudates = static_cast<QuadrantMask>(1u << seed_bit);
        for (int b = 0; b < kNumQuadrants; ++b) {
          if (b != fovea_bit && b != seed_bit && extra_exudate(rng)) exudates |= 1u << b;
        }
        break;
      }
    }
    char id[32];
    std::snprintf(id, sizeof id, "img_%04zu", i);
    images.push_back(GroundTruthImage::from_quadrants(id, exudates, disc, fovea));
    if (grade(images.back()) != grades[i]) {
      throw std::logic_error("generated image does not realize its target grade");
    }
  }
  return images;
}

void save_annotations(const std::vector<GroundTruthImage>& images, std::ostream& out) {
  out << kAnnotationHeader << '\n';
  for (const auto& img : images) {
    out << img.id();
    for (Concept c : kCsvConceptOrder) {
      for (Location l : kQuadrants) out << ',' << (img.present(c, l) ? '1' : '0');
    }
    out << ',' << static_cast<int>(img.grade()) << '\n';
  }
}

void save_annotations(const std::vector<GroundTruthImage>& images,
                      const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  save_annotations(images, out);
}

std::vector<GroundTruthImage> load_annotations(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw SchemaViolation("line 1: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const bool full_grid = line == kFullGridHeader;
  if (!full_grid && line != kAnnotationHeader) {
    throw SchemaViolation("line 1: unexpected header");
  }
  const std::size_t n_fields = full_grid ? 17 : 14;
  const int per_concept = full_grid ? kNumLocations : kNumQuadrants;

  std::vector<GroundTruthImage> images;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    const auto fields = split_fields(line);
    if (fields.size() != n_fields) {
      throw SchemaViolation(where + "expected " + std::to_string(n_fields) + " fields, got " +
                            std::to_string(fields.size()));
    }
    if (fields[0].empty()) throw SchemaViolation(where + "empty image_id");
    std::array<bool, kNumQuestions> presence{};
    for (int c = 0; c < 3; ++c) {
      for (int k = 0; k < per_concept; ++k) {
        const std::size_t col = 1 + static_cast<std::size_t>(c * per_concept + k);
        const std::string& f = fields[col];
        if (f != "0" && f != "1") {
          throw SchemaViolation(where + "field " + std::to_string(col + 1) + " must be 0 or 1");
        }
        const Location l = full_grid ? kAllLocations[k] : kQuadrants[k];
        presence[Question{kCsvConceptOrder[c], l}.index()] = f == "1";
      }
      if (!full_grid) {
        bool any = false;
        for (Location l : kQuadrants) any = any || presence[Question{kCsvConceptOrder[c], l}.index()];
        presence[Question{kCsvConceptOrder[c], Location::WholeImage}.index()] = any;
      }
    }
    const std::string& g = fields[n_fields - 1];
    if (g != "0" && g != "1" && g != "2") throw SchemaViolation(where + "grade must be 0, 1 or 2");
    try {
      auto img = GroundTruthImage::from_presence(fields[0], presence);
      if (static_cast<int>(img.grade()) != g[0] - '0') {
        throw SchemaViolation(where + "stored grade " + g + " disagrees with annotations (" +
                              std::to_string(static_cast<int>(img.grade())) + ")");
      }
      images.push_back(std::move(img));
    } catch (const InvalidInput& e) {
      throw SchemaViolation(where + e.what());
    }
  }
  return images;
}

std::vector<GroundTruthImage> load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaViolation("cannot open " + path.string());
  return load_annotations(in);
}

void SplitSpec::validate() const {
  for (double f : {train, validation, test}) {
    if (!(f >= 0.0 && f <= 1.0)) throw InvalidInput("split fractions must lie in [0, 1]");
  }
  if (std::abs(train + validation + test - 1.0) > 1e-9) {
    throw InvalidInput("split fractions must sum to 1");
  }
}

DatasetSplit split_dataset(const std::vector<GroundTruthImage>& images, const SplitSpec& spec,
                           std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  std::array<std::vector<std::size_t>, kNumGrades> buckets;
  for (std::size_t i = 0; i < images.size(); ++i) {
    buckets[static_cast<int>(images[i].grade())].push_back(i);
  }
  std::vector<std::size_t> train, validation, test;
  DatasetSplit out;
  for (int g = 0; g < kNumGrades; ++g) {
    auto& bucket = buckets[g];
    if (bucket.empty()) continue;
    std::shuffle(bucket.begin(), bucket.end(), rng);
    const auto n = static_cast<long>(bucket.size());
    long n_train = std::lround(n * spec.train);
    long n_val = std::min(n - n_train, std::lround(n * spec.validation));
    const long n_test = n - n_train - n_val;
    train.insert(train.end(), bucket.begin(), bucket.begin() + n_train);
    validation.insert(validation.end(), bucket.begin() + n_train,
                      bucket.begin() + n_train + n_val);
    test.insert(test.end(), bucket.begin() + n_train + n_val, bucket.end());
    const std::array<std::pair<const char*, std::pair<double, long>>, 3> parts = {
        std::pair{"train", std::pair{spec.train, n_train}},
        std::pair{"validation", std::pair{spec.validation, n_val}},
        std::pair{"test", std::pair{spec.test, n_test}}};
    for (const auto& [name, frac_count] : parts) {
      if (frac_count.first > 0.0 && frac_count.second == 0) {
        out.warnings.push_back(std::string(name) + " split has no grade " + std::to_string(g) +
                               " images");
      }
    }
  }
  auto gather = [&](std::vector<std::size_t>& idx) {
    std::sort(idx.begin(), idx.end());
    std::vector<GroundTruthImage> v;
    v.reserve(idx.size());
    for (std::size_t i : idx) v.push_back(images[i]);
    return v;
  };
  out.train = gather(train);
  out.validation = gather(validation);
  out.test = gather(test);
  return out;
}

std::array<int, kNumGrades> count_grades(const std::vector<GroundTruthImage>& images) {
  std::array<int, kNumGrades> c{};
  for (const auto& img : images) ++c[static_cast<int>(img.grade())];
  return c;
}

}  // namespace vtt
