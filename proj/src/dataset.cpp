#include "qmap/dataset.hpp"
#include "qmap/errors.hpp"
#include "qmap/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace qmap::data {

ScoreKind parse_score_kind(const std::string& token) {
    if (token == "MOS") return ScoreKind::MOS;
    if (token == "DMOS") return ScoreKind::DMOS;
    throw FormatError("unknown score kind '" + token + "' (expected MOS or DMOS)");
}

std::string score_kind_token(ScoreKind k) { return k == ScoreKind::MOS ? "MOS" : "DMOS"; }

std::string DatasetManifest::resolve(const std::string& rel) const {
    if (rel.empty()) return rel;
    fs::path p(rel);
    if (p.is_absolute()) return rel;
    return (fs::path(base_dir) / p).string();
}

std::string DatasetManifest::reference_unit(const Entry& e) {
    return e.reference_path.empty() ? e.id : e.reference_path;
}

namespace {

std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

const char* kHeader = "id,distorted,reference,type,level,score,score_kind";

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw LoadError("cannot read manifest " + path);

    DatasetManifest m;
    m.base_dir = fs::path(path).parent_path().string();
    if (m.base_dir.empty()) m.base_dir = ".";

    std::string line;
    int row = 0;
    bool have_header = false, have_range = false;
    std::set<std::string> seen_ids;

    while (std::getline(f, line)) {
        ++row;
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields = split_csv_row(line);
        if (!have_header) {
            std::string normalized;
            for (char c : line)
                if (c != '\r' && c != ' ') normalized += c;
            if (normalized != kHeader)
                throw LoadError(path + ":" + std::to_string(row) + ": expected header '" +
                                kHeader + "'");
            have_header = true;
            continue;
        }
        if (fields.size() != 7)
            throw LoadError(path + ":" + std::to_string(row) + ": expected 7 fields, got " +
                            std::to_string(fields.size()));
        if (fields[0] == "@range") {
            m.score_lo = std::stod(fields[5]);
            m.score_hi = std::stod(fields[6]);
            have_range = true;
            continue;
        }
        if (!have_range)
            throw LoadError(path + ":" + std::to_string(row) +
                            ": the @range declaration row must precede entries");

        Entry e;
        e.id = fields[0];
        e.distorted_path = fields[1];
        e.reference_path = fields[2];
        e.distortion_type = fields[3];
        try {
            e.level = fields[4].empty() ? 0 : std::stoi(fields[4]);
            e.score = std::stod(fields[5]);
        } catch (const std::exception&) {
            throw LoadError(path + ":" + std::to_string(row) + ": bad numeric field");
        }
        e.score_kind = parse_score_kind(fields[6]);

        if (e.id.empty())
            throw LoadError(path + ":" + std::to_string(row) + ": empty id");
        if (!seen_ids.insert(e.id).second)
            throw LoadError(path + ":" + std::to_string(row) + ": duplicate id '" + e.id + "'");
        if (e.distorted_path.empty() || !fs::exists(m.resolve(e.distorted_path)))
            throw LoadError(path + ":" + std::to_string(row) + ": distorted file missing: " +
                            e.distorted_path);
        if (!e.reference_path.empty() && !fs::exists(m.resolve(e.reference_path)))
            throw LoadError(path + ":" + std::to_string(row) + ": reference file missing: " +
                            e.reference_path);
        if (!(e.score >= m.score_lo && e.score <= m.score_hi))
            throw LoadError(path + ":" + std::to_string(row) + ": score " + fmt_double(e.score) +
                            " outside declared range [" + fmt_double(m.score_lo) + "," +
                            fmt_double(m.score_hi) + "]");
        m.entries.push_back(std::move(e));
    }
    if (!have_header) throw LoadError(path + ": missing header row");
    if (!have_range) throw LoadError(path + ": missing @range row");
    return m;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write manifest " + path);
    f << kHeader << "\n";
    f << "@range,,,,," << fmt_double(m.score_lo) << "," << fmt_double(m.score_hi) << "\n";
    for (const Entry& e : m.entries) {
        f << e.id << ',' << e.distorted_path << ',' << e.reference_path << ','
          << e.distortion_type << ',' << e.level << ',' << fmt_double(e.score) << ','
          << score_kind_token(e.score_kind) << "\n";
    }
}

DatasetManifest normalize_scores(const DatasetManifest& m) {
    if (!(m.score_hi > m.score_lo))
        throw DomainError("normalize_scores: degenerate score range");
    DatasetManifest out = m;
    const double scale = 100.0 / (m.score_hi - m.score_lo);
    for (Entry& e : out.entries) e.score = (e.score - m.score_lo) * scale;
    out.score_lo = 0.0;
    out.score_hi = 100.0;
    return out;
}

std::pair<DatasetManifest, DatasetManifest> split(const DatasetManifest& m, const SplitSpec& s) {
    // Unique reference units in first-appearance order, then a seeded shuffle.
    std::vector<std::string> units;
    std::set<std::string> seen;
    for (const Entry& e : m.entries) {
        std::string u = DatasetManifest::reference_unit(e);
        if (seen.insert(u).second) units.push_back(u);
    }
    if (units.size() < 2) throw SizeError("split needs at least 2 reference identities");

    Rng rng = Rng(s.seed).substream("split");
    rng.shuffle(units);

    const auto n = static_cast<long>(units.size());
    long n_train = std::lround(s.train_fraction * static_cast<double>(n));
    n_train = std::clamp(n_train, 1L, n - 1);

    std::set<std::string> train_units(units.begin(), units.begin() + n_train);

    DatasetManifest train = m, test = m;
    train.entries.clear();
    test.entries.clear();
    for (const Entry& e : m.entries) {
        if (train_units.count(DatasetManifest::reference_unit(e)))
            train.entries.push_back(e);
        else
            test.entries.push_back(e);
    }
    return {std::move(train), std::move(test)};
}

} // namespace qmap::data
