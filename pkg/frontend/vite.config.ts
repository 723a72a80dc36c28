import { defineConfig } from "vite";

export default defineConfig({
  server: {
    proxy: { "/api": "http://127.0.0.1:8750" },
  },
  test: {
    environment: "jsdom",
    testTimeout: 30000,
    hookTimeout: 30000,
    pool: "forks",
  },
});
