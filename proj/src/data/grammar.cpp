#include "r2d/data/grammar.hpp"

#include <cctype>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "r2d/errors.hpp"
#include "r2d/tensor/rng.hpp"

namespace r2d::data {

GrammarConfig GrammarConfig::defaults() {
  GrammarConfig g;
  g.labels = {
      {"home care", "safe to manage at home",
       {"mild sore throat", "runny nose", "minor scrape", "seasonal sniffles"}},
      {"see physician within 2 weeks", "a routine follow up concern",
       {"recurring rash", "persistent dry skin", "occasional joint stiffness",
        "gradual weight gain"}},
      {"see physician within 3 days", "in need of a prompt non urgent visit",
       {"ear pain", "painful urination", "lingering cough", "low grade fever"}},
      {"see physician within 4 hours", "at risk of rapid deterioration",
       {"high fever", "severe abdominal pain", "signs of dehydration", "spreading redness"}},
      {"go to ed now", "in need of emergency department care",
       {"deep laceration", "possible broken bone", "sudden severe headache",
        "persistent vomiting"}},
      {"call ems now", "an immediate threat to life",
       {"crushing chest pain", "not breathing normally", "unresponsive collapse",
        "face drooping"}},
  };
  g.note_templates = {
      "{person} calling about {symptom} {duration}",
      "{person} reports {symptom} that started {duration}",
      "triage note : {person} has {symptom} {duration}",
  };
  g.rationale_templates = {
      "the caller describes {symptom} , which is {marker}",
      "{symptom} was reported , so this presentation is {marker}",
      "because of {symptom} the nurse judged the case {marker}",
  };
  g.persons = {"adult caller", "mother of toddler", "elderly patient", "teenage patient",
               "father of infant", "young adult"};
  g.durations = {"since this morning", "for two days", "for about a week", "since last night",
                 "for several hours"};
  g.noise_words = {"also", "worried", "tired", "otherwise", "well", "anxious", "today", "again"};
  return g;
}

std::string normalize_text(const std::string& text) {
  std::istringstream in(text);
  std::string word, out;
  while (in >> word) {
    for (char& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (!out.empty()) out.push_back(' ');
    out += word;
  }
  return out;
}

bool contains_phrase(const std::string& text, const std::string& phrase) {
  const std::string needle = " " + normalize_text(phrase) + " ";
  if (needle.size() <= 2) return false;
  return (" " + normalize_text(text) + " ").find(needle) != std::string::npos;
}

std::vector<std::string> GrammarConfig::label_names() const {
  std::vector<std::string> out;
  for (const auto& l : labels) out.push_back(l.name);
  return out;
}

std::map<std::string, std::string> GrammarConfig::markers() const {
  std::map<std::string, std::string> out;
  for (const auto& l : labels) out.emplace(l.name, l.marker);
  return out;
}

std::string GrammarConfig::label_for_symptom(const std::string& symptom) const {
  for (const auto& l : labels) {
    for (const auto& s : l.symptoms) {
      if (normalize_text(s) == normalize_text(symptom)) return l.name;
    }
  }
  return {};
}

void GrammarConfig::validate() const {
  std::vector<std::string> problems;
  if (labels.size() < 2) problems.push_back("at least 2 labels required");
  std::set<std::string> names, markers_seen, symptoms_seen;
  for (const auto& l : labels) {
    if (l.name.empty()) problems.push_back("label with empty name");
    if (!names.insert(normalize_text(l.name)).second) problems.push_back("duplicate label '" + l.name + "'");
    if (l.marker.empty()) problems.push_back("label '" + l.name + "' has no marker");
    if (!markers_seen.insert(normalize_text(l.marker)).second) {
      problems.push_back("marker '" + l.marker + "' is not unique");
    }
    if (l.symptoms.size() < 3) problems.push_back("label '" + l.name + "' has fewer than 3 symptoms");
    for (const auto& s : l.symptoms) {
      if (!symptoms_seen.insert(normalize_text(s)).second) {
        problems.push_back("symptom '" + s + "' appears more than once");
      }
    }
  }
  for (const auto& a : labels) {
    for (const auto& b : labels) {
      if (&a != &b && !a.marker.empty() && contains_phrase(a.marker, b.marker)) {
        problems.push_back("marker '" + a.marker + "' contains marker '" + b.marker + "'");
      }
    }
  }
  if (note_templates.size() < 2) problems.push_back("at least 2 note templates required");
  if (rationale_templates.size() < 2) problems.push_back("at least 2 rationale templates required");
  for (const auto& t : note_templates) {
    if (t.find("{symptom}") == std::string::npos) problems.push_back("note template without {symptom}: " + t);
  }
  for (const auto& t : rationale_templates) {
    if (t.find("{marker}") == std::string::npos) problems.push_back("rationale template without {marker}: " + t);
  }
  if (persons.empty()) problems.push_back("persons must not be empty");
  if (durations.empty()) problems.push_back("durations must not be empty");
  if (noise_words.empty() && noise_rate > 0.0) problems.push_back("noise_rate > 0 needs noise_words");
  if (!(noise_rate >= 0.0 && noise_rate < 1.0)) problems.push_back("noise_rate must be in [0, 1)");
  if (!(imbalance > 0.0)) problems.push_back("imbalance must be positive");
  // Filler text must not smuggle in a second decisive symptom.
  std::vector<std::string> filler = persons;
  filler.insert(filler.end(), durations.begin(), durations.end());
  filler.insert(filler.end(), noise_words.begin(), noise_words.end());
  filler.insert(filler.end(), note_templates.begin(), note_templates.end());
  for (const auto& f : filler) {
    for (const auto& s : symptoms_seen) {
      if (contains_phrase(f, s)) problems.push_back("filler '" + f + "' contains symptom '" + s + "'");
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid grammar config:";
    for (const auto& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
}

nlohmann::json GrammarConfig::to_json() const {
  nlohmann::ordered_json j;
  nlohmann::ordered_json ls = nlohmann::ordered_json::array();
  for (const auto& l : labels) {
    ls.push_back({{"name", l.name}, {"marker", l.marker}, {"symptoms", l.symptoms}});
  }
  j["labels"] = ls;
  j["note_templates"] = note_templates;
  j["rationale_templates"] = rationale_templates;
  j["persons"] = persons;
  j["durations"] = durations;
  j["noise_words"] = noise_words;
  j["noise_rate"] = noise_rate;
  j["imbalance"] = imbalance;
  j["seed"] = seed;
  return nlohmann::json::parse(j.dump());
}

GrammarConfig GrammarConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("grammar config must be a JSON object");
  static const std::set<std::string> known{"labels",    "note_templates", "rationale_templates",
                                           "persons",   "durations",      "noise_words",
                                           "noise_rate", "imbalance",     "seed"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown grammar config key '" + key + "'");
  }
  GrammarConfig g = defaults();
  try {
    if (j.contains("labels")) {
      g.labels.clear();
      for (const auto& l : j.at("labels")) {
        for (const auto& [key, value] : l.items()) {
          if (key != "name" && key != "marker" && key != "symptoms") {
            throw ConfigError("unknown label key '" + key + "'");
          }
        }
        g.labels.push_back({l.at("name").get<std::string>(), l.at("marker").get<std::string>(),
                            l.at("symptoms").get<std::vector<std::string>>()});
      }
    }
    auto read_list = [&](const char* key, std::vector<std::string>& dst) {
      if (j.contains(key)) dst = j.at(key).get<std::vector<std::string>>();
    };
    read_list("note_templates", g.note_templates);
    read_list("rationale_templates", g.rationale_templates);
    read_list("persons", g.persons);
    read_list("durations", g.durations);
    read_list("noise_words", g.noise_words);
    if (j.contains("noise_rate")) g.noise_rate = j.at("noise_rate").get<double>();
    if (j.contains("imbalance")) g.imbalance = j.at("imbalance").get<double>();
    if (j.contains("seed")) g.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("grammar config: ") + e.what());
  }
  g.validate();
  return g;
}

GrammarConfig GrammarConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

namespace {

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

template <class T>
const T& pick(const std::vector<T>& items, tensor::Rng& rng) {
  return items[rng.below(items.size())];
}

std::size_t pick_label(const std::vector<double>& cumulative, tensor::Rng& rng) {
  const double u = rng.uniform() * cumulative.back();
  for (std::size_t k = 0; k < cumulative.size(); ++k) {
    if (u < cumulative[k]) return k;
  }
  return cumulative.size() - 1;
}

}  // namespace

std::vector<Example> generate_synthetic(const GrammarConfig& cfg, std::size_t n) {
  if (n == 0) throw ContractError("generate_synthetic: n must be positive");
  cfg.validate();
  tensor::Rng rng(cfg.seed);
  std::vector<double> cumulative;
  double weight = 1.0, total = 0.0;
  for (std::size_t k = 0; k < cfg.labels.size(); ++k, weight *= cfg.imbalance) {
    total += weight;
    cumulative.push_back(total);
  }

  std::vector<Example> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const LabelSpec& label = cfg.labels[pick_label(cumulative, rng)];
    const std::string& symptom = pick(label.symptoms, rng);
    const std::string& person = pick(cfg.persons, rng);
    const std::string& duration = pick(cfg.durations, rng);
    const std::string& note_template = pick(cfg.note_templates, rng);
    const std::string& rationale_template = pick(cfg.rationale_templates, rng);

    std::istringstream words(note_template);
    std::string word, note;
    auto emit = [&note](const std::string& w) {
      if (!note.empty()) note.push_back(' ');
      note += w;
    };
    while (words >> word) {
      if (word == "{symptom}") {
        emit(symptom);
        continue;
      }
      emit(replace_all(replace_all(word, "{person}", person), "{duration}", duration));
      if (cfg.noise_rate > 0.0 && rng.uniform() < cfg.noise_rate) emit(pick(cfg.noise_words, rng));
    }
    std::string rationale =
        replace_all(replace_all(rationale_template, "{symptom}", symptom), "{marker}", label.marker);

    std::ostringstream id;
    id << "syn-" << std::setw(6) << std::setfill('0') << i;
    out.push_back({id.str(), note, label.name, normalize_text(rationale)});
  }
  return out;
}

}  // namespace r2d::data
