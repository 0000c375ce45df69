#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "urbanfuture/image.hpp"

namespace urbanfuture {

struct CropPair {
  ImageU8 target;
  ImageU8 predicted;
  Box bbox;
  int vehicle_id{0};
  double horizon_offset{0};
};

// Mean over pixels and channels of squared 8-bit differences.
double mse(const ImageU8& target, const ImageU8& predicted);
inline double mse(const CropPair& p) { return mse(p.target, p.predicted); }

struct SsimConstants {
  double dynamic_range{255.0};
  double c1{(0.01 * 255.0) * (0.01 * 255.0)};
  double c2{(0.03 * 255.0) * (0.03 * 255.0)};
  int window{11};
  double sigma{1.5};
};

// Luma Y = 0.299 R + 0.587 G + 0.114 B, unrounded; single-channel images pass through.
Eigen::MatrixXd to_gray(const ImageU8& image);

// Normalized 1D Gaussian taps; the 2D window is their outer product.
Eigen::VectorXd gaussian_window(int size, double sigma);

// Mean SSIM over all fully contained Gaussian windows of the grayscale crops.
// Crops smaller than the window use one global window with uniform weights.
double ssim(const ImageU8& target, const ImageU8& predicted, const SsimConstants& k = {});
inline double ssim(const CropPair& p, const SsimConstants& k = {}) {
  return ssim(p.target, p.predicted, k);
}

struct FeatureStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // unbiased (n - 1)
  Eigen::Index n{0};
};

// Rows are samples, columns are feature dimensions.
FeatureStats feature_stats(const Eigen::MatrixXd& features);

// ||m_t - m_p||^2 + Tr(C_t + C_p - 2 (C_t C_p)^{1/2}); the square root is taken
// through the symmetric product C_t^{1/2} C_p C_t^{1/2}.
double fid(const FeatureStats& target, const FeatureStats& predicted);

struct InceptionScore {
  double mean{1.0};
  double stddev{0.0};
};

// exp(mean_i KL(p(y|x_i) || p(y))) with p(y) the row mean; rows are split into
// `splits` contiguous groups and the score is averaged over them.
InceptionScore inception_score(const Eigen::MatrixXd& probabilities, int splits = 1);

// Binary matrix file: 4-byte magic "UFM1", uint32 rows, uint32 cols (little
// endian), then rows x cols float32 values in row-major order.
Eigen::MatrixXd read_matrix_file(const std::filesystem::path& path);
void write_matrix_file(const std::filesystem::path& path, const Eigen::MatrixXd& m);

struct CropScore {
  int vehicle_id{0};
  Box bbox;
  double mse{0};
  double ssim{0};
};

struct HorizonFeatures {
  std::optional<Eigen::MatrixXd> target_features;
  std::optional<Eigen::MatrixXd> predicted_features;
  std::optional<Eigen::MatrixXd> predicted_probabilities;
};

struct HorizonInput {
  double offset{0};  // seconds after the reference frame
  std::optional<ImageU8> predicted;
  std::optional<ImageU8> ground_truth;
  std::vector<std::pair<int, Box>> boxes;  // ground-truth (vehicle id, box) at this horizon
  HorizonFeatures features;
};

struct HorizonReport {
  double offset{0};
  std::vector<CropScore> crops;
  double mse{0};
  double ssim{0};
  std::optional<double> fid;
  std::optional<double> inception;
  std::vector<std::string> notes;
};

struct ClipReport {
  std::vector<HorizonReport> horizons;
};

// Tight-crop evaluation: each ground-truth box is cropped from both frames and
// scored; MSE and SSIM are averaged over crops, FID and IS use the supplied
// per-crop features and are skipped with a note when absent.
ClipReport evaluate_clip(const std::vector<HorizonInput>& horizons, const SsimConstants& k = {},
                         int inception_splits = 1);

std::string horizon_label(double offset);
std::string format_table(const ClipReport& report);
std::string format_key_values(const ClipReport& report);

}  // namespace urbanfuture
