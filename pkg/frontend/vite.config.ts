import { defineConfig } from "vitest/config";

export default defineConfig({
  build: {
    outDir: "dist",
    // Everything inlined or hashed; the service serves this directory as-is.
    assetsDir: "assets",
  },
  server: {
    // During development the API lives in the Python service.
    proxy: {
      "/api": "http://127.0.0.1:8077",
    },
  },
  test: {
    environment: "jsdom",
    include: ["test/**/*.test.ts"],
  },
});
