#include "irid/render/integrators.hpp"

#include "irid/core/error.hpp"

namespace irid {

namespace {

Vec3 point_light_sum(const Vec3& point, const Vec3& n, const Vec3& v, const BrdfParams& params,
                     const std::vector<PointLight>& lights, const Occluder& occluder) {
    Vec3 total(0.f);
    for (const PointLight& light : lights) {
        Vec3 to_light = light.position - point;
        float d2 = length_squared(to_light);
        if (d2 <= 0.f) continue;
        float dist = std::sqrt(d2);
        Vec3 l = to_light / dist;
        float nol = dot(n, l);
        if (nol <= 0.f) continue;
        if (occluder && occluder(point, l, dist)) continue;
        total += eval_brdf(params, n, v, l) * (nol / d2) * light.intensity;
    }
    return total;
}

} // namespace

Vec3 render_mc(const Vec3& point, const Vec3& n, const Vec3& v, const BrdfParams& params,
               const EnvSource& env, const std::vector<PointLight>& point_lights, int spp,
               Pcg32& rng, const Occluder& occluder) {
    require(spp >= 1, "render_mc: spp must be >= 1");
    Vec3 total = point_light_sum(point, n, v, params, point_lights, occluder);
    if (env.black() || dot(n, v) <= 0.f) return total;

    float alpha = params.alpha();
    Vec3 acc(0.f);
    for (int s = 0; s < spp; ++s) {
        // Cosine-sampled direction, weighted against the GGX strategy.
        {
            Vec3 l = sample_cosine(n, rng.next_float(), rng.next_float());
            float nol = dot(n, l);
            if (nol > 0.f) {
                float pc = pdf_cosine(n, l);
                float pg = pdf_ggx_reflect(n, v, l, alpha);
                if (pc > 0.f) {
                    float w = pc / (pc + pg);
                    acc += env.radiance(l) * eval_brdf(params, n, v, l) * (nol * w / pc);
                }
            }
        }
        // GGX half-vector sample, weighted against the cosine strategy.
        {
            Vec3 h = sample_ggx_h(n, alpha, rng.next_float(), rng.next_float());
            Vec3 l = 2.f * dot(v, h) * h - v;
            float nol = dot(n, l);
            if (nol > 0.f) {
                float pg = pdf_ggx_reflect(n, v, l, alpha);
                float pc = pdf_cosine(n, l);
                if (pg > 0.f) {
                    float w = pg / (pc + pg);
                    acc += env.radiance(l) * eval_brdf(params, n, v, l) * (nol * w / pg);
                }
            }
        }
    }
    return total + acc / static_cast<float>(spp);
}

Vec3 render_splitsum(const Vec3& n, const Vec3& v, const BrdfParams& params,
                     const EnvironmentMap& env, const std::vector<PointLight>& point_lights,
                     const Vec3& point) {
    require(env.prefiltered_ready(), "render_splitsum: environment not prefiltered");
    float nov = dot(n, v);
    Vec3 total = point_light_sum(point, n, v, params, point_lights, nullptr);
    if (nov <= 0.f) return total;
    nov = std::min(nov, 1.f);

    Vec3 r = reflect(v, n);
    float rough = std::clamp(params.roughness, 0.f, 1.f);
    Vec3 pref = env.sample_prefiltered(r, rough);
    float scale, bias;
    env.lut(nov, rough, scale, bias);
    Vec3 specular = pref * (params.f0() * scale + Vec3(bias));
    Vec3 diffuse = params.albedo * (1.f - params.metallic) * env.irradiance_at(n);
    return total + diffuse + specular;
}

} // namespace irid
