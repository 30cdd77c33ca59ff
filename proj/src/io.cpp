#include "remtrack/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace remtrack::io {
namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

double parse_number(std::string_view field, std::size_t line, std::size_t index) {
    field = trim(field);
    if (!field.empty() && field.front() == '+') field.remove_prefix(1);
    double v = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size() ||
        !std::isfinite(v)) {
        throw std::invalid_argument("line " + std::to_string(line) + ": field " +
                                    std::to_string(index + 1) + " is not a number: '" +
                                    std::string(field) + "'");
    }
    return v;
}

int parse_integer(std::string_view field, std::size_t line, std::size_t index) {
    const double v = parse_number(field, line, index);
    if (v != std::floor(v) || std::fabs(v) > 2e9) {
        throw std::invalid_argument("line " + std::to_string(line) + ": field " +
                                    std::to_string(index + 1) + " must be an integer");
    }
    return static_cast<int>(v);
}

std::string format_int(int v) { return std::to_string(v); }

}  // namespace

std::string format_fixed6(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed, 6);
    std::string out(buf, res.ptr);
    // Values that round to zero keep no sign.
    if (out == "-0.000000") out.erase(0, 1);
    return out;
}

std::vector<MotRecord> parse_mot_csv(std::string_view text) {
    std::vector<MotRecord> out;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        line = trim(line);
        if (line.empty()) continue;

        std::vector<std::string_view> fields;
        std::size_t pos = 0;
        while (true) {
            const auto comma = line.find(',', pos);
            fields.push_back(line.substr(pos, comma - pos));
            if (comma == std::string_view::npos) break;
            pos = comma + 1;
        }
        if (fields.size() != 7 && fields.size() != 9 && fields.size() != 10) {
            throw std::invalid_argument("line " + std::to_string(line_no) +
                                        ": expected 7, 9 or 10 fields, got " +
                                        std::to_string(fields.size()));
        }
        MotRecord r;
        r.frame = parse_integer(fields[0], line_no, 0);
        r.id = parse_integer(fields[1], line_no, 1);
        r.left = parse_number(fields[2], line_no, 2);
        r.top = parse_number(fields[3], line_no, 3);
        r.width = parse_number(fields[4], line_no, 4);
        r.height = parse_number(fields[5], line_no, 5);
        r.conf = parse_number(fields[6], line_no, 6);
        if (fields.size() == 9) {
            r.cls = parse_integer(fields[7], line_no, 7);
            r.visibility = parse_number(fields[8], line_no, 8);
        } else if (fields.size() == 10) {
            for (std::size_t k = 7; k < 10; ++k) parse_number(fields[k], line_no, k);
        }
        if (r.frame < 1) {
            throw std::invalid_argument("line " + std::to_string(line_no) + ": frame must be >= 1");
        }
        if (!(r.width > 0.0) || !(r.height > 0.0)) {
            throw std::invalid_argument("line " + std::to_string(line_no) +
                                        ": width and height must be positive");
        }
        if (r.visibility && (*r.visibility < 0.0 || *r.visibility > 1.0)) {
            throw std::invalid_argument("line " + std::to_string(line_no) +
                                        ": visibility must lie in [0, 1]");
        }
        out.push_back(r);
    }
    std::stable_sort(out.begin(), out.end(), [](const MotRecord& a, const MotRecord& b) {
        return std::tie(a.frame, a.id) < std::tie(b.frame, b.id);
    });
    return out;
}

std::string write_mot_csv(const std::vector<MotRecord>& records) {
    std::string out;
    for (const auto& r : records) {
        out += format_int(r.frame) + ',' + format_int(r.id) + ',' + format_fixed6(r.left) + ',' +
               format_fixed6(r.top) + ',' + format_fixed6(r.width) + ',' +
               format_fixed6(r.height) + ',' + format_fixed6(r.conf);
        if (r.visibility) {
            out += ',' + format_int(r.cls) + ',' + format_fixed6(*r.visibility) + '\n';
        } else {
            out += ",-1,-1,-1\n";
        }
    }
    return out;
}

std::vector<MotRecord> to_mot_records(const BoxSequence& seq) {
    std::vector<MotRecord> out;
    for (std::size_t t = 0; t < seq.size(); ++t) {
        std::vector<InstanceBox> frame = seq[t];
        std::sort(frame.begin(), frame.end(),
                  [](const InstanceBox& a, const InstanceBox& b) { return a.instance < b.instance; });
        for (const auto& ib : frame) {
            MotRecord r;
            r.frame = static_cast<int>(t) + 1;
            r.id = ib.instance;
            r.left = ib.box.left();
            r.top = ib.box.top();
            r.width = ib.box.w;
            r.height = ib.box.h;
            out.push_back(r);
        }
    }
    return out;
}

std::string write_results_csv(const BoxSequence& tracks, double conf) {
    auto records = to_mot_records(tracks);
    for (auto& r : records) r.conf = conf;
    return write_mot_csv(records);
}

BoxSequence to_box_sequence(const std::vector<MotRecord>& records, std::size_t frame_count) {
    std::size_t frames = frame_count;
    for (const auto& r : records) frames = std::max(frames, static_cast<std::size_t>(r.frame));
    BoxSequence seq(frames);
    for (const auto& r : records) {
        seq[static_cast<std::size_t>(r.frame - 1)].push_back(InstanceBox{r.id, r.box()});
    }
    return seq;
}

std::string write_scenario_jsonl(const sim::GroundTruthSequence& seq) {
    std::string out;
    for (std::size_t t = 0; t < seq.frames.size(); ++t) {
        for (const auto& o : seq.frames[t]) {
            nlohmann::json j = {{"t", t},      {"id", o.id},  {"cx", o.box.cx},
                                {"cy", o.box.cy}, {"w", o.box.w}, {"h", o.box.h},
                                {"vis", o.visibility}, {"group", o.group}};
            out += j.dump() + '\n';
        }
    }
    return out;
}

sim::GroundTruthSequence read_scenario_jsonl(std::string_view text) {
    sim::GroundTruthSequence seq;
    std::size_t record = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        const std::string_view line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (line.empty()) continue;
        sim::GtObject o;
        int t = 0;
        try {
            const auto j = nlohmann::json::parse(line);
            t = j.at("t").get<int>();
            o.id = j.at("id").get<int>();
            o.box.cx = j.at("cx").get<double>();
            o.box.cy = j.at("cy").get<double>();
            o.box.w = j.at("w").get<double>();
            o.box.h = j.at("h").get<double>();
            o.visibility = j.at("vis").get<double>();
            o.group = j.at("group").get<int>();
        } catch (const nlohmann::json::exception& e) {
            throw std::invalid_argument("record " + std::to_string(record) + ": " + e.what());
        }
        if (t < 0 || o.id < 0 || !o.box.valid() || o.visibility < 0.0 || o.visibility > 1.0) {
            throw std::invalid_argument("record " + std::to_string(record) +
                                        ": t and id must be >= 0, box valid, vis in [0, 1]");
        }
        if (static_cast<std::size_t>(t) >= seq.frames.size()) seq.frames.resize(t + 1);
        auto& frame = seq.frames[static_cast<std::size_t>(t)];
        for (const auto& other : frame) {
            if (other.id == o.id) {
                throw std::invalid_argument("record " + std::to_string(record) + ": id " +
                                            std::to_string(o.id) + " repeated in frame " +
                                            std::to_string(t));
            }
        }
        frame.push_back(o);
        ++record;
    }
    for (auto& frame : seq.frames) {
        std::sort(frame.begin(), frame.end(),
                  [](const sim::GtObject& a, const sim::GtObject& b) { return a.id < b.id; });
    }
    return seq;
}

BoxSequence gt_boxes(const sim::GroundTruthSequence& seq) {
    BoxSequence out;
    for (const auto& frame : seq.frames) {
        std::vector<InstanceBox> f;
        for (const auto& o : frame) f.push_back(InstanceBox{o.id, o.box});
        out.push_back(std::move(f));
    }
    return out;
}

std::string write_gt_csv(const sim::GroundTruthSequence& seq) {
    std::vector<MotRecord> records;
    for (std::size_t t = 0; t < seq.frames.size(); ++t) {
        for (const auto& o : seq.frames[t]) {
            MotRecord r;
            r.frame = static_cast<int>(t) + 1;
            r.id = o.id;
            r.left = o.box.left();
            r.top = o.box.top();
            r.width = o.box.w;
            r.height = o.box.h;
            r.conf = 1.0;
            r.cls = 1;
            r.visibility = o.visibility;
            records.push_back(r);
        }
    }
    return write_mot_csv(records);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

nlohmann::json read_json_file(const std::string& path) {
    const std::string text = read_text_file(path);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("'" + path + "' is not valid JSON: " + e.what());
    }
}

void write_json_file(const std::string& path, const nlohmann::json& doc) {
    write_text_file(path, doc.dump(2) + '\n');
}

}  // namespace remtrack::io
