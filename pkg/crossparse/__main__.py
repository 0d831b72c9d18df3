from crossparse.run import main

main()
