#include "irid/eval/sweep.hpp"

#include "irid/math/rng.hpp"

namespace irid {

MetricReport eval_cell(const UNet& net, const NoiseSchedule& sched, const DatasetManifest& m,
                       int views, int lights, int steps, uint64_t seed) {
    require(views >= 1 && lights >= 1, "sweep: cell needs at least one view and light");
    std::vector<MetricReport> per_object;
    for (int oi = 0; oi < static_cast<int>(m.objects.size()); ++oi) {
        const ManifestObject& obj = m.objects[oi];
        require(static_cast<int>(obj.views.size()) >= views,
                "sweep: object has " + std::to_string(obj.views.size()) +
                    " views, cell needs " + std::to_string(views));
        require(static_cast<int>(obj.lights.size()) >= lights,
                "sweep: object has " + std::to_string(obj.lights.size()) +
                    " lighting slots, cell needs " + std::to_string(lights));
        std::vector<Image> cond;
        std::vector<int> view_of;
        for (int v = 0; v < views; ++v)
            for (int l = 0; l < lights; ++l) {
                cond.push_back(load_rgb(m, oi, v, l));
                view_of.push_back(v);
            }
        auto sets = infer(net, sched, cond, steps, mix64(seed ^ (0x5eedull + oi)));

        std::vector<MetricReport> per_image;
        for (size_t i = 0; i < sets.size(); ++i) {
            IntrinsicSet gt = load_intrinsics(m, oi, view_of[i]);
            per_image.push_back(evaluate_set(sets[i], gt));
        }
        per_object.push_back(average_reports(per_image));
    }
    return average_reports(per_object);
}

std::vector<SweepCell> sweep_views_lights(const UNet& net, const NoiseSchedule& sched,
                                          const DatasetManifest& m,
                                          const std::vector<int>& views_list,
                                          const std::vector<int>& lights_list, int steps,
                                          uint64_t seed) {
    std::vector<SweepCell> table;
    for (int v : views_list)
        for (int l : lights_list) {
            SweepCell cell;
            cell.views = v;
            cell.lights = l;
            cell.report = eval_cell(net, sched, m, v, l, steps, seed);
            table.push_back(cell);
        }
    return table;
}

std::string sweep_csv(const std::vector<SweepCell>& table) {
    std::string out = "views,lights," + MetricReport::csv_header() + "\n";
    for (const SweepCell& c : table)
        out += std::to_string(c.views) + "," + std::to_string(c.lights) + "," +
               c.report.csv_row() + "\n";
    return out;
}

} // namespace irid
