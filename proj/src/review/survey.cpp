#include "organdiff/review/survey.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>

#include <fcntl.h>
#include <unistd.h>

#include <fmt/format.h>

#include "organdiff/error.hpp"
#include "organdiff/rng.hpp"

namespace organdiff::review {

namespace fs = std::filesystem;

std::string_view choice_name(Choice c) {
    switch (c) {
        case Choice::Real: return "Real";
        case Choice::Fake: return "Fake";
        case Choice::NotSure: return "NotSure";
    }
    return "NotSure";
}

std::optional<Choice> parse_choice(std::string_view text) {
    for (auto c : kAllChoices) {
        if (text == choice_name(c)) return c;
    }
    return std::nullopt;
}

std::string_view ground_truth_name(GroundTruth g) { return g == GroundTruth::Real ? "real" : "synthetic"; }

std::optional<std::size_t> Survey::index_of(std::string_view id) const {
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i].id == id) return i;
    }
    return std::nullopt;
}

Survey survey_from_json(const nlohmann::json& j, const fs::path& base) {
    Survey s;
    std::vector<ReviewItem> items;
    try {
        s.seed = j.value("seed", std::uint64_t{0});
        std::set<std::string> seen;
        for (const auto& it : j.at("items")) {
            ReviewItem item;
            item.id = it.at("id").get<std::string>();
            if (item.id.empty()) throw DataError("survey item with an empty id");
            if (!seen.insert(item.id).second) throw DataError("duplicate survey item '" + item.id + "'");
            const fs::path mesh(it.at("mesh").get<std::string>());
            item.mesh = mesh.is_absolute() || base.empty() ? mesh : base / mesh;
            const auto gt = it.at("ground_truth").get<std::string>();
            if (gt == "real") {
                item.ground_truth = GroundTruth::Real;
            } else if (gt == "synthetic") {
                item.ground_truth = GroundTruth::Synthetic;
            } else {
                throw DataError(fmt::format("survey item '{}': ground_truth must be real or synthetic", item.id));
            }
            items.push_back(std::move(item));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed survey manifest: ") + e.what());
    }
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(s.seed);
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (auto i : order) s.items.push_back(std::move(items[i]));
    return s;
}

Survey load_survey(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open survey manifest " + path.string());
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return survey_from_json(j, path.has_parent_path() ? path.parent_path() : fs::path("."));
}

std::string encode_mesh(const geometry::TriMesh& mesh) {
    static_assert(std::endian::native == std::endian::little, "wire format is little-endian");
    const auto nv = static_cast<std::uint32_t>(mesh.vertices.size());
    const auto nf = static_cast<std::uint32_t>(mesh.faces.size());
    std::string out(8 + 12 * static_cast<std::size_t>(nv) + 12 * static_cast<std::size_t>(nf), '\0');
    char* p = out.data();
    std::memcpy(p, &nv, 4);
    std::memcpy(p + 4, &nf, 4);
    p += 8;
    for (const auto& v : mesh.vertices) {
        const float xyz[3] = {static_cast<float>(v.x()), static_cast<float>(v.y()), static_cast<float>(v.z())};
        std::memcpy(p, xyz, 12);
        p += 12;
    }
    for (const auto& f : mesh.faces) {
        std::memcpy(p, f.data(), 12);
        p += 12;
    }
    return out;
}

nlohmann::json to_json(const LabelRecord& r) {
    return {{"item", r.item}, {"reviewer", r.reviewer}, {"choice", choice_name(r.choice)}, {"timestamp_ms", r.timestamp_ms}};
}

LabelRecord label_from_json(const nlohmann::json& j) {
    LabelRecord r;
    r.item = j.at("item").get<std::string>();
    r.reviewer = j.at("reviewer").get<std::string>();
    const auto c = parse_choice(j.at("choice").get<std::string>());
    if (!c) throw DataError("label record with an unknown choice");
    r.choice = *c;
    r.timestamp_ms = j.at("timestamp_ms").get<std::int64_t>();
    return r;
}

LabelStore::LabelStore(fs::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
    std::size_t keep = 0;
    if (fs::exists(path_)) {
        std::ifstream f(path_, std::ios::binary);
        const std::string text{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
        std::size_t pos = 0;
        std::size_t line_no = 0;
        while (pos < text.size()) {
            const auto nl = text.find('\n', pos);
            if (nl == std::string::npos) break;  // torn tail
            ++line_no;
            const auto line = text.substr(pos, nl - pos);
            pos = nl + 1;
            if (line.empty()) continue;
            try {
                records_.push_back(label_from_json(nlohmann::json::parse(line)));
            } catch (const std::exception& e) {
                throw DataError(fmt::format("{}:{}: bad label record: {}", path_.string(), line_no, e.what()));
            }
        }
        keep = pos;
        if (keep < text.size()) fs::resize_file(path_, keep);
    }
    fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) throw DataError("cannot open label store " + path_.string());
}

LabelStore::~LabelStore() {
    if (fd_ >= 0) ::close(fd_);
}

void LabelStore::append(const LabelRecord& r) {
    const std::string line = to_json(r).dump() + "\n";
    std::lock_guard lock(mu_);
    std::size_t done = 0;
    while (done < line.size()) {
        const auto n = ::write(fd_, line.data() + done, line.size() - done);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw DataError("write to label store failed: " + std::string(std::strerror(errno)));
        }
        done += static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0) throw DataError("fsync of label store failed: " + std::string(std::strerror(errno)));
    records_.push_back(r);
}

std::vector<LabelRecord> LabelStore::snapshot() const {
    std::lock_guard lock(mu_);
    return records_;
}

SurveySummary summarize(const std::vector<LabelRecord>& records, const Survey& survey) {
    std::map<std::pair<std::string, std::string>, Choice> latest;
    SurveySummary s;
    for (const auto& r : records) {
        if (!survey.index_of(r.item)) {
            ++s.ignored;
            continue;
        }
        latest[{r.reviewer, r.item}] = r.choice;
    }
    std::set<std::string> reviewers;
    for (const auto& [key, choice] : latest) {
        const auto c = static_cast<std::size_t>(choice);
        ++s.counts[c];
        ++s.total;
        reviewers.insert(key.first);
        const auto& item = survey.items[*survey.index_of(key.second)];
        ++s.confusion[static_cast<std::size_t>(item.ground_truth)][c];
    }
    s.reviewers = reviewers.size();
    return s;
}

nlohmann::json to_json(const SurveySummary& s, bool reveal) {
    nlohmann::json counts;
    for (auto c : kAllChoices) counts[std::string(choice_name(c))] = s.counts[static_cast<std::size_t>(c)];
    nlohmann::json j{{"total", s.total}, {"counts", counts}, {"reviewers", s.reviewers}, {"ignored", s.ignored}};
    if (reveal) {
        nlohmann::json conf;
        for (auto g : {GroundTruth::Real, GroundTruth::Synthetic}) {
            nlohmann::json row;
            for (auto c : kAllChoices) {
                row[std::string(choice_name(c))] = s.confusion[static_cast<std::size_t>(g)][static_cast<std::size_t>(c)];
            }
            conf[std::string(ground_truth_name(g))] = row;
        }
        j["confusion"] = conf;
    }
    return j;
}

}  // namespace organdiff::review
