#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "remtrack/geometry.hpp"
#include "remtrack/simulator.hpp"

namespace remtrack::io {

/// One row of a MOTChallenge file. Frames are 1-based here and 0-based
/// everywhere else.
struct MotRecord {
    int frame = 1;
    int id = -1;
    double left = 0.0;
    double top = 0.0;
    double width = 1.0;
    double height = 1.0;
    double conf = 1.0;
    int cls = -1;
    std::optional<double> visibility;

    BoundingBox box() const { return BoundingBox::from_corner(left, top, width, height); }
    bool operator==(const MotRecord&) const = default;
};

/// Accepts rows of 7 fields (frame,id,left,top,w,h,conf), 9 fields (ground
/// truth: ...,conf,class,visibility) and 10 fields (detections and results:
/// ...,conf,x,y,z). Blank lines are skipped. Result is sorted by (frame, id).
/// Errors carry the 1-based line number.
std::vector<MotRecord> parse_mot_csv(std::string_view text);

/// Records with a visibility are written as 9-field ground-truth rows, the
/// others as 10-field rows with -1 placeholders.
std::string write_mot_csv(const std::vector<MotRecord>& records);

/// "frame,id,left,top,width,height,conf,-1,-1,-1" per box, frames 1-based.
std::string write_results_csv(const BoxSequence& tracks, double conf = 1.0);

std::vector<MotRecord> to_mot_records(const BoxSequence& seq);
/// Groups records by frame; `frame_count` pads trailing empty frames.
BoxSequence to_box_sequence(const std::vector<MotRecord>& records, std::size_t frame_count = 0);

/// One JSON object per (frame, instance): {"t","id","cx","cy","w","h","vis","group"}.
std::string write_scenario_jsonl(const sim::GroundTruthSequence& seq);
/// Errors name the 0-based record index.
sim::GroundTruthSequence read_scenario_jsonl(std::string_view text);

/// Ground-truth sequence in MOT form (visibility included).
std::string write_gt_csv(const sim::GroundTruthSequence& seq);
BoxSequence gt_boxes(const sim::GroundTruthSequence& seq);

/// Locale-independent fixed notation with 6 decimals.
std::string format_fixed6(double value);

/// Whole-file helpers; failures name the path.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);
nlohmann::json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& doc);

}  // namespace remtrack::io
