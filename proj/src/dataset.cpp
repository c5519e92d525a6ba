#include "tabreason/dataset.hpp"

#include "tabreason/text.hpp"

#include <fstream>
#include <sstream>

namespace tabreason {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, std::string_view contents) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DatasetError("cannot write " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    }
    fs::rename(tmp, path);
}

nlohmann::json table_to_json(const Table& table) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t r = 1; r < table.rows(); ++r) rows.push_back(table.row(r));
    return {{"title", table.title()}, {"header", table.header()}, {"rows", std::move(rows)}};
}

Table table_from_json(const nlohmann::json& j, Orientation hint) {
    std::vector<Table::Row> cells;
    cells.push_back(j.at("header").get<Table::Row>());
    for (const auto& r : j.at("rows")) cells.push_back(r.get<Table::Row>());
    for (auto& row : cells) {
        for (auto& cell : row) {
            for (auto& ch : cell) {
                if (ch == '\n' || ch == '\r') ch = ' ';
            }
        }
    }
    return Table(j.value("title", std::string{}), std::move(cells), hint);
}

nlohmann::json task_to_json(const Task& task) {
    auto j = table_to_json(task.table);
    j["id"] = task.id;
    j["question"] = task.question;
    j["answers"] = task.gold;
    return j;
}

Task task_from_json(const nlohmann::json& j) {
    Task task{j.at("id").get<std::string>(), table_from_json(j), j.at("question").get<std::string>(),
              j.at("answers").get<std::vector<std::string>>()};
    if (task.question.empty()) throw DatasetError("task " + task.id + ": empty question");
    if (task.gold.empty()) throw DatasetError("task " + task.id + ": no gold answers");
    return task;
}

std::vector<Task> load_dataset(const fs::path& jsonl) {
    std::vector<Task> tasks;
    std::size_t line_no = 0;
    for (const auto& line : text::split_lines(read_file(jsonl))) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            tasks.push_back(task_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw DatasetError(jsonl.string() + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const TableError& e) {
            throw DatasetError(jsonl.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return tasks;
}

void save_dataset(const fs::path& jsonl, const std::vector<Task>& tasks) {
    std::string out;
    for (const auto& t : tasks) out += task_to_json(t).dump() + "\n";
    write_file(jsonl, out);
}

void append_task(const fs::path& jsonl, const Task& task) {
    if (jsonl.has_parent_path()) fs::create_directories(jsonl.parent_path());
    std::ofstream out(jsonl, std::ios::binary | std::ios::app);
    if (!out) throw DatasetError("cannot append to " + jsonl.string());
    out << task_to_json(task).dump() << "\n";
}

Table load_table_file(const fs::path& path, TableFormat format, std::string title) {
    auto parsed = parse_table(read_file(path), format);
    return Table(std::move(title), parsed.cells(), Orientation::row_table);
}

std::vector<Task> load_wtq_questions(const fs::path& questions_tsv, const fs::path& root) {
    std::vector<Task> tasks;
    const auto lines = text::split_lines(read_file(questions_tsv));
    bool header = true;
    for (const auto& line : lines) {
        if (text::trim(line).empty()) continue;
        const auto fields = text::split(line, "\t");
        if (header) {
            header = false;
            if (!fields.empty() && fields[0] == "id") continue;
        }
        if (fields.size() < 4) throw DatasetError("malformed WTQ line: " + line);
        const fs::path table_path = root / fields[2];
        const auto format = table_path.extension() == ".tsv" ? TableFormat::tsv : TableFormat::csv;
        Task task;
        task.id = fields[0];
        task.question = text::trim_copy(fields[1]);
        task.table = load_table_file(table_path, format, table_path.stem().string());
        for (const auto& a : text::split(fields[3], "|")) {
            if (!text::trim(a).empty()) task.gold.push_back(text::trim_copy(a));
        }
        if (task.gold.empty()) throw DatasetError("task " + task.id + ": no gold answers");
        tasks.push_back(std::move(task));
    }
    return tasks;
}

} // namespace tabreason
