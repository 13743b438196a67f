#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <fstream>

#include "json.hpp"
#include "support.hpp"
#include "swm/manifest.hpp"

using namespace swm;

TEST_CASE("git blob hashes") {
  CHECK(git_blob_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  // printf 'hello\n' | git hash-object --stdin
  CHECK(git_blob_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
  const auto dir = swm::testing::scratch_dir("manifest-hash");
  {
    std::ofstream f(dir / "x.txt", std::ios::binary);
    f << "hello\n";
  }
  CHECK(git_blob_hash_file((dir / "x.txt").string()) == "ce013625030ba8dba906f756967f9e9ca394464a");
  CHECK_THROWS(git_blob_hash_file((dir / "missing").string()));
}

TEST_CASE("manifest JSON") {
  const auto dir = swm::testing::scratch_dir("manifest-json");
  {
    std::ofstream f(dir / "in.tsv", std::ios::binary);
    f << "1\ta b\n";
  }
  RunManifest m;
  m.command = "train";
  m.argv = {"swm", "train", "--seed", "3"};
  m.config = {{"epochs", "2"}, {"variant", "full"}};
  m.seed = 3;
  m.add_input((dir / "in.tsv").string());
  m.outputs = {"model.ckpt"};
  const auto path = (dir / "train.manifest.json").string();
  m.write(path);

  std::ifstream f(path);
  auto j = nlohmann::json::parse(f);
  CHECK(j["command"] == "train");
  CHECK(j["seed"] == 3);
  CHECK(j["argv"].size() == 4);
  CHECK(j["config"]["variant"] == "full");
  CHECK(j["inputs"][(dir / "in.tsv").string()] == git_blob_hash("1\ta b\n"));
  CHECK(j["outputs"][0] == "model.ckpt");
  CHECK(m.to_json() == m.to_json());
}
