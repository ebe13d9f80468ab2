#pragma once

#include <map>
#include <string>

namespace infuse {

struct HttpRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string authorization;  // raw Authorization header
  std::string body;
};

struct HttpReply {
  int status = 200;
  std::string body;
};

}  // namespace infuse
