#pragma once

#include "tabreason/table.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace tabreason {

/// One question over one table. `table` is row-oriented with headings in
/// row 0; the title lives on the table.
struct Task {
    std::string id;
    Table table;
    std::string question;
    std::vector<std::string> gold;

    const std::string& title() const { return table.title(); }
};

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// {id, title, header: [..], rows: [[..]], question, answers: [..]}
nlohmann::json task_to_json(const Task& task);
Task task_from_json(const nlohmann::json& j);

/// Table payload without task fields: {title, header, rows}.
nlohmann::json table_to_json(const Table& table);
Table table_from_json(const nlohmann::json& j, Orientation hint = Orientation::row_table);

std::vector<Task> load_dataset(const std::filesystem::path& jsonl);
void save_dataset(const std::filesystem::path& jsonl, const std::vector<Task>& tasks);
void append_task(const std::filesystem::path& jsonl, const Task& task);

/// Reads a CSV/TSV table file; the first row becomes the header.
Table load_table_file(const std::filesystem::path& path, TableFormat format, std::string title = {});

/// WikiTableQuestions question file (tab-separated: id, utterance, context,
/// targetValue). `context` is resolved relative to `root`; multiple target
/// values are separated by '|'. Titles default to the table file stem.
std::vector<Task> load_wtq_questions(const std::filesystem::path& questions_tsv,
                                     const std::filesystem::path& root);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

} // namespace tabreason
