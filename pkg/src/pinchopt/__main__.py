from pinchopt.cli import main

main()
