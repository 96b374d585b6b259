#include "irid/eval/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "irid/core/error.hpp"

namespace irid {

namespace {

void check_pair(const Image& pred, const Image& gt, const Image& mask, const char* op) {
    require(pred.width == gt.width && pred.height == gt.height &&
                pred.channels == gt.channels,
            std::string(op) + ": pred/gt shapes differ");
    require(mask.width == gt.width && mask.height == gt.height,
            std::string(op) + ": mask shape differs");
    require(mask.channels >= 1, std::string(op) + ": mask needs a channel");
}

bool on(const Image& mask, int x, int y) { return mask.at(x, y, 0) > 0.5f; }

int64_t count_mask(const Image& mask) {
    int64_t n = 0;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x) n += on(mask, x, y);
    return n;
}

double to_db(double m) {
    if (m <= 0.0) return 99.0;
    return std::min(99.0, 10.0 * std::log10(1.0 / m));
}

} // namespace

double si_psnr(const Image& pred, const Image& gt, const Image& mask) {
    check_pair(pred, gt, mask, "si_psnr");
    const int64_t n = count_mask(mask);
    require(n > 0, "si_psnr: empty mask");

    const int c = pred.channels;
    std::vector<double> num(c, 0.0), den(c, 0.0);
    for (int y = 0; y < gt.height; ++y)
        for (int x = 0; x < gt.width; ++x) {
            if (!on(mask, x, y)) continue;
            for (int ch = 0; ch < c; ++ch) {
                const double p = pred.at(x, y, ch);
                num[ch] += gt.at(x, y, ch) * p;
                den[ch] += p * p;
            }
        }
    std::vector<double> alpha(c);
    for (int ch = 0; ch < c; ++ch) alpha[ch] = den[ch] > 0.0 ? num[ch] / den[ch] : 0.0;

    double err = 0.0;
    for (int y = 0; y < gt.height; ++y)
        for (int x = 0; x < gt.width; ++x) {
            if (!on(mask, x, y)) continue;
            for (int ch = 0; ch < c; ++ch) {
                const double d = alpha[ch] * pred.at(x, y, ch) - gt.at(x, y, ch);
                err += d * d;
            }
        }
    return to_db(err / (double(n) * c));
}

double psnr(const Image& pred, const Image& gt, const Image& mask) {
    return to_db(mse(pred, gt, mask));
}

double ssim(const Image& pred, const Image& gt, const Image& mask) {
    check_pair(pred, gt, mask, "ssim");
    constexpr int kWin = 11, kHalf = 5;
    require(gt.width >= kWin && gt.height >= kWin, "ssim: image smaller than the window");
    require(count_mask(mask) > 0, "ssim: empty mask");

    // 11-tap Gaussian, sigma 1.5
    double w1[kWin], wsum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - kHalf;
        w1[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        wsum += w1[i];
    }
    for (double& w : w1) w /= wsum;

    constexpr double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
    double total = 0.0;
    int64_t windows = 0;
    for (int y = kHalf; y < gt.height - kHalf; ++y)
        for (int x = kHalf; x < gt.width - kHalf; ++x) {
            if (!on(mask, x, y)) continue;
            double acc = 0.0;
            for (int ch = 0; ch < gt.channels; ++ch) {
                double mu_p = 0, mu_g = 0, pp = 0, gg = 0, pg = 0;
                for (int dy = -kHalf; dy <= kHalf; ++dy)
                    for (int dx = -kHalf; dx <= kHalf; ++dx) {
                        const double w = w1[dy + kHalf] * w1[dx + kHalf];
                        const double p = pred.at(x + dx, y + dy, ch);
                        const double g = gt.at(x + dx, y + dy, ch);
                        mu_p += w * p;
                        mu_g += w * g;
                        pp += w * p * p;
                        gg += w * g * g;
                        pg += w * p * g;
                    }
                const double var_p = pp - mu_p * mu_p;
                const double var_g = gg - mu_g * mu_g;
                const double cov = pg - mu_p * mu_g;
                acc += (2 * mu_p * mu_g + C1) * (2 * cov + C2) /
                       ((mu_p * mu_p + mu_g * mu_g + C1) * (var_p + var_g + C2));
            }
            total += acc / gt.channels;
            ++windows;
        }
    require(windows > 0, "ssim: no masked window centers inside the valid region");
    return total / double(windows);
}

double normal_cosine(const Image& pred, const Image& gt, const Image& mask) {
    check_pair(pred, gt, mask, "normal_cosine");
    require(pred.channels == 3, "normal_cosine: normals are 3-channel");
    const int64_t n = count_mask(mask);
    require(n > 0, "normal_cosine: empty mask");

    double total = 0.0;
    for (int y = 0; y < gt.height; ++y)
        for (int x = 0; x < gt.width; ++x) {
            if (!on(mask, x, y)) continue;
            Vec3 p = pred.pixel(x, y), g = gt.pixel(x, y);
            const float lp = length(p), lg = length(g);
            if (lp < 1e-6f || lg < 1e-6f) continue; // zero-length scores 0
            total += double(dot(p, g)) / (double(lp) * lg);
        }
    return total / double(n);
}

double mse(const Image& pred, const Image& gt, const Image& mask) {
    check_pair(pred, gt, mask, "mse");
    const int64_t n = count_mask(mask);
    require(n > 0, "mse: empty mask");
    double err = 0.0;
    for (int y = 0; y < gt.height; ++y)
        for (int x = 0; x < gt.width; ++x) {
            if (!on(mask, x, y)) continue;
            for (int ch = 0; ch < gt.channels; ++ch) {
                const double d = double(pred.at(x, y, ch)) - gt.at(x, y, ch);
                err += d * d;
            }
        }
    return err / (double(n) * gt.channels);
}

std::string MetricReport::csv_header() {
    return "albedo_si_psnr,albedo_ssim,normal_cos,metallic_mse,roughness_mse,mr_mse,pixels";
}

std::string MetricReport::csv_row() const {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.8f,%.8f,%.8f,%lld", albedo_si_psnr,
                  albedo_ssim, normal_cos, metallic_mse, roughness_mse, mr_mse,
                  static_cast<long long>(pixels));
    return buf;
}

MetricReport evaluate_set(const IntrinsicSet& pred, const IntrinsicSet& gt) {
    MetricReport r;
    const Image& mask = gt.mask;
    r.albedo_si_psnr = si_psnr(pred.albedo, gt.albedo, mask);
    r.albedo_ssim = ssim(pred.albedo, gt.albedo, mask);
    r.normal_cos = normal_cosine(pred.normal, gt.normal, mask);
    r.metallic_mse = mse(pred.metallic, gt.metallic, mask);
    r.roughness_mse = mse(pred.roughness, gt.roughness, mask);
    r.mr_mse = 0.5 * (r.metallic_mse + r.roughness_mse);
    r.pixels = count_mask(mask);
    return r;
}

MetricReport average_reports(const std::vector<MetricReport>& reports) {
    require(!reports.empty(), "average_reports: no reports");
    MetricReport avg;
    for (const MetricReport& r : reports) {
        avg.albedo_si_psnr += r.albedo_si_psnr;
        avg.albedo_ssim += r.albedo_ssim;
        avg.normal_cos += r.normal_cos;
        avg.metallic_mse += r.metallic_mse;
        avg.roughness_mse += r.roughness_mse;
        avg.mr_mse += r.mr_mse;
        avg.pixels += r.pixels;
    }
    const double n = double(reports.size());
    avg.albedo_si_psnr /= n;
    avg.albedo_ssim /= n;
    avg.normal_cos /= n;
    avg.metallic_mse /= n;
    avg.roughness_mse /= n;
    avg.mr_mse /= n;
    return avg;
}

} // namespace irid
