#pragma once

#include <string>
#include <vector>

#include "irid/core/types.hpp"

namespace irid {

// All metrics evaluate foreground pixels only (mask > 0.5); object-centric
// renders make the background trivially correct, so it is excluded.

// PSNR after the optimal per-channel rescale alpha* = <gt,pred>/<pred,pred>
// of the prediction (0 when the prediction is identically zero); peak 1.0,
// capped at 99 dB for exact matches.
double si_psnr(const Image& pred, const Image& gt, const Image& mask);

// Plain PSNR over the mask, peak 1.0, capped at 99 dB.
double psnr(const Image& pred, const Image& gt, const Image& mask);

// Mean SSIM with the standard 11x11 Gaussian window (sigma 1.5, K1=0.01,
// K2=0.03, peak 1.0) over windows whose center pixel is masked; channels
// are averaged. Images smaller than the window are rejected.
double ssim(const Image& pred, const Image& gt, const Image& mask);

// Mean dot product of unit normals over the mask. A zero-length predicted
// normal counts as similarity 0.
double normal_cosine(const Image& pred, const Image& gt, const Image& mask);

// Mean squared error over masked pixels, all channels pooled.
double mse(const Image& pred, const Image& gt, const Image& mask);

struct MetricReport {
    double albedo_si_psnr = 0.0;
    double albedo_ssim = 0.0;
    double normal_cos = 0.0;
    double metallic_mse = 0.0;
    double roughness_mse = 0.0;
    double mr_mse = 0.0; // metallic and roughness channels pooled
    int64_t pixels = 0;  // evaluated (masked) pixel count

    std::string csv_row() const;
    static std::string csv_header();
};

// Scores a predicted set against ground truth over the ground-truth mask.
MetricReport evaluate_set(const IntrinsicSet& pred, const IntrinsicSet& gt);

// Element-wise mean of several reports (pixel counts summed).
MetricReport average_reports(const std::vector<MetricReport>& reports);

} // namespace irid
