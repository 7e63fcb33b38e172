#include "xr/service.hpp"

#include <httplib.h>

namespace xr {

void serve(const Api& api, const std::string& host, int port) {
    httplib::Server server;
    const auto route = [&api](const httplib::Request& req, httplib::Response& res) {
        std::map<std::string, std::string> params;
        for (const auto& [k, v] : req.params) params.emplace(k, v);
        const ApiResponse r = api.handle(req.method, req.path, params, req.body);
        res.status = r.status;
        res.set_content(r.body.dump(), "application/json");
    };
    server.Get(".*", route);
    server.Post(".*", route);
    if (!server.listen(host, port)) {
        throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
    }
}

}  // namespace xr
