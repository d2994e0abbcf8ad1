#include "qmap/study.hpp"
#include "qmap/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace qmap::eval {

std::vector<StudyRow> patch_average_study(
    const std::vector<std::pair<img::QualityMap, double>>& maps,
    const std::vector<int>& blocks, const StudyOptions& opt) {
    if (maps.size() < 8) throw SizeError("patch_average_study needs at least 8 maps");
    const int edge = maps[0].first.height;
    for (const auto& [m, s] : maps)
        if (m.height != edge || m.width != edge)
            throw ShapeError("patch_average_study: maps must share dimensions");
    if (opt.pooler.input_size != edge)
        throw ShapeError("patch_average_study: pooler input_size must equal the map edge");

    // One fixed holdout split reused for every block size.
    std::vector<int> idx(maps.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    Rng(opt.split_seed).substream("study-split").shuffle(idx);
    long n_test = std::lround(opt.test_fraction * static_cast<double>(maps.size()));
    n_test = std::clamp(n_test, 3L, static_cast<long>(maps.size()) - 3);
    std::vector<int> test_idx(idx.begin(), idx.begin() + n_test);
    std::vector<int> train_idx(idx.begin() + n_test, idx.end());

    std::vector<StudyRow> rows;
    for (int block : blocks) {
        auto degraded_sample = [&](int i) {
            img::QualityMap m = fr::avg_patchify_map(maps[i].first, block);
            models::PatchScoreSample s;
            s.patch = nn::from_plane(m);
            s.score = maps[i].second;
            return s;
        };

        std::vector<models::PatchScoreSample> train_set, test_set;
        for (int i : train_idx) train_set.push_back(degraded_sample(i));
        for (int i : test_idx) test_set.push_back(degraded_sample(i));

        models::PoolerNet net = models::build_pooler(opt.pooler, opt.train.seed);
        models::train_pooler(net, {}, train_set, opt.train);

        std::vector<double> pred = models::pooler_scores(net, {}, test_set);
        std::vector<double> gt;
        for (const auto& s : test_set) gt.push_back(s.score);

        StudyRow row;
        row.block = block;
        row.srcc = srcc(pred, gt);
        row.plcc = plcc(pred, gt);
        rows.push_back(row);
    }
    return rows;
}

void save_study_csv(const std::vector<StudyRow>& rows, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write study table " + path);
    f << "block,srcc,plcc\n";
    char buf[96];
    for (const StudyRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", r.block, r.srcc, r.plcc);
        f << buf;
    }
}

std::vector<double> repeated_splits(const std::function<double(uint64_t)>& experiment,
                                    int repetitions, uint64_t base_seed) {
    if (repetitions < 1) throw DomainError("repeated_splits: repetitions must be >= 1");
    std::vector<double> values;
    values.reserve(repetitions);
    Rng root(base_seed);
    for (int i = 0; i < repetitions; ++i)
        values.push_back(experiment(root.substream("rep", i).next_u64()));
    return values;
}

double median(std::vector<double> values) {
    if (values.empty()) throw SizeError("median of an empty list");
    std::sort(values.begin(), values.end());
    const size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

} // namespace qmap::eval
